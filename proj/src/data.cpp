#include "measurenet/data.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace measurenet {

SetBatch sample_uniform_cube_sets(std::size_t count, std::size_t n, std::size_t d,
                                  double half_width, Rng& rng) {
  if (n == 0 || d == 0) throw std::invalid_argument("sample_uniform_cube_sets: n and d must be positive");
  if (half_width <= 0.0)
    throw std::invalid_argument("sample_uniform_cube_sets: half_width must be positive");
  SetBatch batch;
  batch.sets.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Matrix pts(n, d);
    for (double& v : pts.data) v = rng.uniform(-half_width, half_width);
    batch.sets.push_back(std::move(pts));
  }
  return batch;
}

RobustBatch sample_robust_sets(std::size_t count, std::size_t n,
                               const RobustParams& params, Rng& rng) {
  if (n == 0 || params.d == 0)
    throw std::invalid_argument("sample_robust_sets: n and d must be positive");
  if (params.epsilon < 0.0 || params.epsilon >= 1.0)
    throw std::invalid_argument("sample_robust_sets: epsilon must lie in [0, 1)");
  RobustBatch out;
  out.batch.sets.reserve(count);
  out.batch.targets = Matrix(count, params.d);
  out.from_q.resize(count);
  std::vector<double> m(params.d), mprime(params.d);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t c = 0; c < params.d; ++c) m[c] = rng.normal(0.0, params.sigma_m);
    for (std::size_t c = 0; c < params.d; ++c)
      mprime[c] = rng.normal(m[c], params.sigma_mprime);
    Matrix pts(n, params.d);
    out.from_q[s].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool contaminated = rng.uniform() < params.epsilon;
      out.from_q[s][i] = contaminated ? 1 : 0;
      double* row = pts.row(i);
      if (contaminated) {
        for (std::size_t c = 0; c < params.d; ++c) row[c] = rng.normal(mprime[c], params.sigma_q);
      } else {
        for (std::size_t c = 0; c < params.d; ++c) row[c] = rng.normal(m[c], params.sigma_p);
      }
    }
    out.batch.sets.push_back(std::move(pts));
    for (std::size_t c = 0; c < params.d; ++c) out.batch.targets(s, c) = m[c];
  }
  return out;
}

const char* const kResultsHeader =
    "run_id,class,target,lambda,train_n,test_n,seed,metric,value";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

// The identifier-ish columns never contain commas by construction; refuse to
// write one that does rather than silently corrupt the table.
void check_field(const std::string& s, const char* col) {
  if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos)
    throw std::invalid_argument(std::string("write_results: ") + col +
                                " value contains a delimiter: '" + s + "'");
}

}  // namespace

void write_results(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f << kResultsHeader << '\n';
  for (const EvalRow& r : rows) {
    check_field(r.run_id, "run_id");
    check_field(r.cls, "class");
    check_field(r.target, "target");
    check_field(r.metric, "metric");
    f << r.run_id << ',' << r.cls << ',' << r.target << ',' << format_double(r.lambda)
      << ',' << r.train_n << ',' << r.test_n << ',' << r.seed << ',' << r.metric << ','
      << format_double(r.value) << '\n';
  }
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double_field(const std::string& s, std::size_t lineno, const char* col) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  // ERANGE on underflow still yields the correctly rounded subnormal; only
  // overflow (result pinned at HUGE_VAL) is a real parse failure.
  const bool overflow = errno == ERANGE && std::fabs(v) == HUGE_VAL;
  if (end == s.c_str() || *end != '\0' || overflow)
    throw std::runtime_error("results row " + std::to_string(lineno) + ": bad " + col +
                             " '" + s + "'");
  return v;
}

std::int64_t parse_int_field(const std::string& s, std::size_t lineno, const char* col) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error("results row " + std::to_string(lineno) + ": bad " + col +
                             " '" + s + "'");
  return v;
}

std::uint64_t parse_u64_field(const std::string& s, std::size_t lineno, const char* col) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error("results row " + std::to_string(lineno) + ": bad " + col +
                             " '" + s + "'");
  return v;
}

}  // namespace

std::vector<EvalRow> read_results(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  if (line == std::string(kResultsHeader) + "\r") line.pop_back();
  if (line != kResultsHeader)
    throw std::runtime_error("'" + path.string() + "' has an unexpected header: " + line);
  std::vector<EvalRow> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 9)
      throw std::runtime_error("results row " + std::to_string(lineno) + ": expected 9 columns, got " +
                               std::to_string(fields.size()));
    EvalRow r;
    r.run_id = fields[0];
    r.cls = fields[1];
    r.target = fields[2];
    r.lambda = parse_double_field(fields[3], lineno, "lambda");
    r.train_n = static_cast<int>(parse_int_field(fields[4], lineno, "train_n"));
    r.test_n = static_cast<int>(parse_int_field(fields[5], lineno, "test_n"));
    r.seed = parse_u64_field(fields[6], lineno, "seed");
    r.metric = fields[7];
    r.value = parse_double_field(fields[8], lineno, "value");
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text,
                            const std::vector<std::string>& allowed) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    bool known = false;
    for (const auto& a : allowed)
      if (a == key) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
    if (out.count(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
    out[key] = ConfigEntry{value, lineno};
  }
  return out;
}

ConfigMap parse_config(const std::filesystem::path& path,
                       const std::vector<std::string>& allowed) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), allowed);
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const ConfigEntry& e, const char* want) {
  throw std::invalid_argument("config line " + std::to_string(e.line) + ": key '" + key +
                              "' expects " + want + ", got '" + e.value + "'");
}

}  // namespace

double config_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(it->second.value.c_str(), &end);
  if (end == it->second.value.c_str() || *end != '\0' || errno == ERANGE)
    bad_value(key, it->second, "a number");
  return v;
}

std::int64_t config_int(const ConfigMap& cfg, const std::string& key, std::int64_t fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(it->second.value.c_str(), &end, 10);
  if (end == it->second.value.c_str() || *end != '\0' || errno == ERANGE)
    bad_value(key, it->second, "an integer");
  return v;
}

std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second.value;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

std::vector<double> config_double_list(const ConfigMap& cfg, const std::string& key,
                                       const std::vector<double>& fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  std::vector<double> out;
  for (const std::string& part : split_list(it->second.value)) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(part.c_str(), &end);
    if (part.empty() || end == part.c_str() || *end != '\0' || errno == ERANGE)
      bad_value(key, it->second, "a comma-separated list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::int64_t> config_int_list(const ConfigMap& cfg, const std::string& key,
                                          const std::vector<std::int64_t>& fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  std::vector<std::int64_t> out;
  for (const std::string& part : split_list(it->second.value)) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(part.c_str(), &end, 10);
    if (part.empty() || end == part.c_str() || *end != '\0' || errno == ERANGE)
      bad_value(key, it->second, "a comma-separated list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> config_string_list(const ConfigMap& cfg, const std::string& key,
                                            const std::vector<std::string>& fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  return split_list(it->second.value);
}

}  // namespace measurenet
