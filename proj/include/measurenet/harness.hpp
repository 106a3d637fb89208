#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "measurenet/data.hpp"
#include "measurenet/model.hpp"
#include "measurenet/optim.hpp"
#include "measurenet/targets.hpp"

namespace measurenet {

// Everything an experiment run needs, with the documented defaults baked in.
// Values come from a `key = value` config file plus the CLI's --seed/--desk
// flags; unknown keys are rejected at parse time via allowed_keys().
struct SuiteConfig {
  std::uint64_t base_seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::size_t seeds = 10;   // independent training runs per cell

  // Synthetic-benchmark protocol: train at N=4 on 100 sets from the cube
  // [-3,3]^d, d=10, full-batch Adam, then test across set sizes.
  std::size_t d = 10;
  double half_width = 3.0;
  std::size_t h1 = 0;  // 0 = per-class default widths
  std::size_t h2 = 0;
  std::size_t train_n = 4;
  std::size_t train_sets = 100;
  std::size_t iterations = 5000;
  double lr = 5e-4;
  std::size_t test_sets = 1000;
  std::size_t cv_sets = 1000;
  std::vector<std::size_t> test_n_grid = {2, 4, 8, 16, 32, 64};
  std::vector<double> lambda_grid = {0.0, 1e-6, 1e-4, 1e-2};
  std::vector<std::string> synthetic_targets = {
      "max_inv",  "softmax_inv", "median_inv",   "second_inv",
      "mean_inv", "potential",   "neuron",       "smooth_neuron"};
  std::vector<std::string> compare_targets = {"mean_inv"};  // deepsets_compare
  double softmax_lambda = 0.1;

  // Robust-mean protocol. The full-scale defaults below match the documented
  // experiment (5000-set batch, 30000 iterations, same lambda grid as the
  // synthetic cells); --desk shrinks them to 500 sets / 5000 iterations.
  RobustParams robust;
  std::size_t robust_train_n = 20;
  std::size_t robust_train_sets = 5000;
  std::size_t robust_iterations = 30000;
  double robust_lr = 5e-4;
  std::size_t robust_test_sets = 1000;
  std::vector<std::size_t> robust_test_n_grid = {10, 20, 30, 40};
  std::vector<double> robust_lambda_grid = {0.0, 1e-6, 1e-4, 1e-2};
  double robust_filter_tau = 0.1;
  double robust_filter_cher = 1.5;

  // Point-cloud digit classification (desk-scale subset by default).
  std::string mnist_images;
  std::string mnist_labels;
  std::size_t mnist_subset = 2000;
  std::size_t mnist_train = 1600;  // first slice of the subset; rest is test
  std::size_t mnist_max_points = 200;
  std::vector<std::size_t> mnist_test_points = {100, 200};
  std::size_t mnist_iterations = 300;
  double mnist_lr = 1e-3;
  std::size_t mnist_h1 = 500;
  std::size_t mnist_h2 = 500;
  std::size_t mnist_seeds = 1;
  double mnist_threshold = 0.5;
  double mnist_lambda = 0.0;

  // Diagnostics experiment.
  std::size_t diag_pairs = 200;        // random pairs in the continuity probe
  std::size_t diag_trials = 100;       // trials per N in concentration
  std::size_t diag_reference = 100000; // reference sample size

  static const std::vector<std::string>& allowed_keys();
  static SuiteConfig from_config(const ConfigMap& cfg);
  // Shrinks the robust protocol to the desk-scale 500 sets / 5000 iterations.
  void apply_desk();
};

struct CellFailure {
  std::string run_id;
  std::string message;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<CellFailure> failures;
};

// Per-(class, target, metric, test_n) mean and unbiased sample standard
// deviation over seeds, in first-appearance order of the rows.
struct SummaryRow {
  std::string cls;
  std::string target;
  std::string metric;
  int test_n = 0;
  std::size_t seeds = 0;
  double mean = 0.0;
  double stddev = 0.0;
};
std::vector<SummaryRow> summarize(const std::vector<EvalRow>& rows);

// Training seed for one cell: the base seed combined with a hash of the
// cell's identity string, so no two cells share an RNG stream.
std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& cls,
                        const std::string& target, double lambda,
                        std::size_t seed_index);

// "exp:class:target:L<lambda>:N<train_n>:s<seed>"; lambda is printed with
// 17 significant digits so replay re-derives the identical cell.
std::string make_run_id(const std::string& experiment_tag, const std::string& cls,
                        const std::string& target, double lambda,
                        std::size_t train_n, std::size_t seed_index);

// Trains one model per grid value on fresh data and scores each on a shared
// fresh validation batch at the training N; returns the best lambda, with
// near-ties (1e-9 relative, 1e-15 absolute) resolved toward the larger
// lambda. A singleton grid returns its element without training anything.
// Supports the synthetic targets and robust_mean_truth.
double cross_validate_lambda(ModelClass cls, const TargetSpec& target,
                             const SuiteConfig& cfg, const std::vector<double>& grid,
                             Rng& rng);

// Runs one named experiment end to end:
//   synthetic        S1/S2/S3 x the configured targets
//   deepsets_compare S1 + DeepSetsUnnormalized x compare_targets
//   robust           S1/S2/S3 + the three estimator baselines
//   mnist            S1/S2/S3 on point clouds
//   diagnostics      the measure-continuity checks (rows go to the
//                    diagnostics CSV; failed checks are reported as failures)
// Per-cell errors are recorded in `failures` and the suite continues. Cells
// run on a work pool; output order is independent of the thread count.
EvalReport run_suite(const std::string& experiment, const SuiteConfig& cfg);

// Recomputes every row of the cell a run_id names, in isolation.
std::vector<EvalRow> replay(const std::string& run_id, const SuiteConfig& cfg);

// One trained cell, exposed for the `train` subcommand: returns the rows
// plus the training result so the caller can dump the loss history or save
// a checkpoint. `experiment` accepts the suite names or the run_id tags.
struct CellOutcome {
  std::vector<EvalRow> rows;
  TrainResult trained;
};
CellOutcome run_training_cell(const std::string& experiment, ModelClass cls,
                              const std::string& target_name, double lambda,
                              std::size_t seed_index, const SuiteConfig& cfg);

struct DiagnosticRow {
  std::string check;
  std::string parameter;
  double value = 0.0;
  double bound = 0.0;
  bool ok = false;
};
std::vector<DiagnosticRow> run_diagnostics(const SuiteConfig& cfg);
// CSV with header "check,parameter,value,bound,ok".
void write_diagnostics(const std::filesystem::path& path,
                       const std::vector<DiagnosticRow>& rows);

}  // namespace measurenet
