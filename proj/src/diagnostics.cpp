#include "measurenet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "measurenet/summation.hpp"

namespace measurenet {

namespace {

// Both inputs sorted ascending. Factored out so callers with a fixed
// reference sample can sort it once.
double w1_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t p = a.size(), q = b.size();
  double s = 0.0, c = 0.0;
  auto add = [&](double x) {
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  };
  if (p == q) {
    for (std::size_t i = 0; i < p; ++i) add(std::fabs(a[i] - b[i]));
    return (s + c) / static_cast<double>(p);
  }
  const std::uint64_t pp = p, qq = q, total = pp * qq;
  std::uint64_t t = 0;
  while (t < total) {
    const std::uint64_t ia = t / qq, ib = t / pp;
    const std::uint64_t t_next = std::min({(ia + 1) * qq, (ib + 1) * pp, total});
    add(std::fabs(a[ia] - b[ib]) * static_cast<double>(t_next - t));
    t = t_next;
  }
  return (s + c) / static_cast<double>(total);
}

}  // namespace

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("wasserstein1_1d: both multisets must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return w1_sorted(a, b);
}

ValueFn value_function(const TargetSpec& spec) {
  switch (spec.kind) {
    case TargetKind::max_inv:
      return [](const std::vector<double>& v) { return value_max(v); };
    case TargetKind::mean_inv:
      return [](const std::vector<double>& v) { return value_mean(v); };
    case TargetKind::median_inv:
      return [](const std::vector<double>& v) { return value_median(v); };
    case TargetKind::second_largest_inv:
      return [](const std::vector<double>& v) { return value_second_largest(v); };
    case TargetKind::softmax_inv: {
      const double lambda = spec.lambda;
      return [lambda](const std::vector<double>& v) { return value_softmax(v, lambda); };
    }
    default:
      throw std::domain_error(std::string("target '") + target_name(spec.kind) +
                              "' has no 1-D value form");
  }
}

namespace {

double empirical_quantile(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) return 0.0;
  const double pos = level * static_cast<double>(sorted.size());
  std::size_t idx = static_cast<std::size_t>(std::ceil(pos));
  if (idx == 0) idx = 1;
  if (idx > sorted.size()) idx = sorted.size();
  return sorted[idx - 1];
}

}  // namespace

ContinuityReport continuity_modulus(const std::string& name, const ValueFn& f,
                                    const std::function<std::vector<double>(Rng&)>& sampler,
                                    std::size_t random_pairs,
                                    const std::vector<std::size_t>& adversarial_sizes,
                                    Rng& rng) {
  ContinuityReport rep;
  rep.target = name;
  std::vector<double> ratios;
  auto probe = [&](const std::vector<double>& a, const std::vector<double>& b) {
    const double dist = wasserstein1_1d(a, b);
    if (dist <= 0.0) return -1.0;
    const double ratio = std::fabs(f(a) - f(b)) / dist;
    ratios.push_back(ratio);
    return ratio;
  };
  for (std::size_t n : adversarial_sizes) {
    if (n == 0) throw std::invalid_argument("continuity_modulus: adversarial size 0");
    std::vector<double> base(n, 0.0);
    std::vector<double> moved(n, 0.0);
    moved.back() = 1.0;
    rep.adversarial.emplace_back(n, probe(base, moved));
  }
  for (std::size_t p = 0; p < random_pairs; ++p) {
    Rng sub = rng.derive(p + 1);
    const std::vector<double> a = sampler(sub);
    const std::vector<double> b = sampler(sub);
    probe(a, b);
  }
  rep.pairs = ratios.size();
  std::sort(ratios.begin(), ratios.end());
  rep.max_ratio = ratios.empty() ? 0.0 : ratios.back();
  rep.quantile_levels = {0.5, 0.9, 0.99};
  for (double level : rep.quantile_levels)
    rep.quantile_values.push_back(empirical_quantile(ratios, level));
  return rep;
}

ContinuityReport continuity_modulus(const TargetSpec& spec,
                                    const std::function<std::vector<double>(Rng&)>& sampler,
                                    std::size_t random_pairs,
                                    const std::vector<std::size_t>& adversarial_sizes,
                                    Rng& rng) {
  return continuity_modulus(target_name(spec.kind), value_function(spec), sampler,
                            random_pairs, adversarial_sizes, rng);
}

double duplication_check(const ValueFn& f, const std::vector<double>& values,
                         std::size_t k) {
  if (k == 0) throw std::invalid_argument("duplication_check: k must be >= 1");
  std::vector<double> dup;
  dup.reserve(values.size() * k);
  for (double v : values)
    for (std::size_t r = 0; r < k; ++r) dup.push_back(v);
  return std::fabs(f(values) - f(dup));
}

double duplication_check(const TargetSpec& spec, const Matrix& set, std::size_t k) {
  if (k == 0) throw std::invalid_argument("duplication_check: k must be >= 1");
  Matrix dup(set.rows * k, set.cols);
  for (std::size_t i = 0; i < set.rows; ++i)
    for (std::size_t r = 0; r < k; ++r)
      std::copy(set.row(i), set.row(i) + set.cols, dup.row(i * k + r));
  return std::fabs(eval_target(spec, set) - eval_target(spec, dup));
}

SoftmaxBound softmax_bound_check(const std::vector<double>& values, double lambda) {
  if (lambda <= 0.0)
    throw std::invalid_argument("softmax_bound_check: lambda must be positive");
  if (values.empty())
    throw std::invalid_argument("softmax_bound_check: empty value set");
  // gap = max - (1/lambda) log mean exp(lambda v) = (log N - log S)/lambda
  // with S = sum exp(lambda (v - max)) >= 1. Sharing log N between gap and
  // bound makes gap <= bound hold exactly in floating point, so ok never
  // flips on rounding noise when the gap sits at the bound.
  const double m = value_max(values);
  std::vector<double> e(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    e[i] = std::exp(lambda * (values[i] - m));
  const double log_s = std::max(0.0, std::log(multiset_sum(std::move(e))));
  const double log_n = std::log(static_cast<double>(values.size()));
  SoftmaxBound out;
  out.gap = (log_n - log_s) / lambda;
  out.bound = log_n / lambda;
  out.ok = out.gap <= out.bound;
  return out;
}

std::vector<ConcentrationRow> empirical_concentration(
    const std::function<double(Rng&)>& dist, const std::vector<std::size_t>& n_grid,
    std::size_t trials, Rng& rng, std::size_t reference_size) {
  if (trials == 0) throw std::invalid_argument("empirical_concentration: trials must be >= 1");
  if (reference_size == 0)
    throw std::invalid_argument("empirical_concentration: empty reference");
  std::vector<double> ref(reference_size);
  {
    Rng ref_rng = rng.derive(0);
    for (double& v : ref) v = dist(ref_rng);
  }
  std::sort(ref.begin(), ref.end());
  std::vector<ConcentrationRow> table;
  std::vector<double> sample;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::size_t n = n_grid[gi];
    if (n == 0) throw std::invalid_argument("empirical_concentration: N = 0 in grid");
    double acc = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      Rng sub = rng.derive(1 + gi * trials + t);
      sample.resize(n);
      for (double& v : sample) v = dist(sub);
      std::sort(sample.begin(), sample.end());
      acc += w1_sorted(sample, ref);
    }
    table.push_back({n, acc / static_cast<double>(trials)});
  }
  return table;
}

}  // namespace measurenet
