#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "measurenet/matrix.hpp"
#include "measurenet/rng.hpp"

namespace measurenet {

// A batch of point sets with optional supervision. `targets` has one row per
// set when present (scalar regression uses one column, vector regression d
// columns); `labels` is used instead for classification.
struct SetBatch {
  std::vector<Matrix> sets;  // each n_b x d
  Matrix targets;            // count x o, rows == 0 when absent
  std::vector<int> labels;   // empty when absent

  std::size_t count() const { return sets.size(); }
};

// `count` sets of `n` points drawn uniformly from [-half_width, half_width]^d.
// Draw order is fixed (set, point, coordinate), so a seed pins the batch.
SetBatch sample_uniform_cube_sets(std::size_t count, std::size_t n, std::size_t d,
                                  double half_width, Rng& rng);

// Contaminated-Gaussian location model. Per set: m ~ N(0, sigma_m^2 I),
// m' ~ N(m, sigma_mprime^2 I), then each point independently comes from
// Q = N(m', sigma_q^2 I) with probability epsilon, else P = N(m, sigma_p^2 I).
// The regression target is the latent m, never a statistic of the points.
struct RobustParams {
  std::size_t d = 10;
  double sigma_m = 1.0;
  double sigma_mprime = 2.0;
  double sigma_p = 1.5;
  double sigma_q = 1.5;
  double epsilon = 0.2;
};

struct RobustBatch {
  SetBatch batch;                                // targets = true means, count x d
  std::vector<std::vector<std::uint8_t>> from_q;  // per set, per point: 1 if drawn from Q
};

RobustBatch sample_robust_sets(std::size_t count, std::size_t n,
                               const RobustParams& params, Rng& rng);

// One result-table row. The CSV schema is part of the artifact's external
// interface: header and column order are fixed, doubles print with 17
// significant digits so a read-back is lossless.
struct EvalRow {
  std::string run_id;
  std::string cls;
  std::string target;
  double lambda = 0.0;
  int train_n = 0;
  int test_n = 0;
  std::uint64_t seed = 0;
  std::string metric;  // "mse" or "error_rate"
  double value = 0.0;
};

extern const char* const kResultsHeader;

void write_results(const std::filesystem::path& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_results(const std::filesystem::path& path);

// Formats a double so that parsing it back returns the identical bits.
std::string format_double(double v);

// Minimal config-file reader: one `key = value` per line, `#` starts a
// comment, blank lines ignored. Keys outside `allowed` are an error naming
// the offending line. Values keep their raw text; typed access happens at
// the point of use.
struct ConfigEntry {
  std::string value;
  int line = 0;
};
using ConfigMap = std::map<std::string, ConfigEntry>;

ConfigMap parse_config(const std::filesystem::path& path,
                       const std::vector<std::string>& allowed);
ConfigMap parse_config_text(const std::string& text,
                            const std::vector<std::string>& allowed);

// Typed extraction with errors that cite the config line.
double config_double(const ConfigMap& cfg, const std::string& key, double fallback);
std::int64_t config_int(const ConfigMap& cfg, const std::string& key, std::int64_t fallback);
std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback);
std::vector<double> config_double_list(const ConfigMap& cfg, const std::string& key,
                                       const std::vector<double>& fallback);
std::vector<std::int64_t> config_int_list(const ConfigMap& cfg, const std::string& key,
                                          const std::vector<std::int64_t>& fallback);
std::vector<std::string> config_string_list(const ConfigMap& cfg, const std::string& key,
                                            const std::vector<std::string>& fallback);

}  // namespace measurenet
