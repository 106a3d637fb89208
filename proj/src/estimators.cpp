#include "measurenet/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "measurenet/summation.hpp"

namespace measurenet {

std::vector<double> sample_mean(const Matrix& points) {
  if (points.rows == 0) throw std::invalid_argument("sample_mean: empty point set");
  std::vector<double> mean(points.cols, 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const double* r = points.row(i);
    for (std::size_t c = 0; c < points.cols; ++c) mean[c] += r[c];
  }
  for (double& v : mean) v /= static_cast<double>(points.rows);
  return mean;
}

namespace {

double dist_to_row(const std::vector<double>& y, const double* row, std::size_t d) {
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double diff = row[c] - y[c];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace

GeometricMedianResult geometric_median(const Matrix& points, double tol,
                                       std::size_t max_iter) {
  if (points.rows == 0) throw std::invalid_argument("geometric_median: empty point set");
  if (tol <= 0.0) throw std::invalid_argument("geometric_median: tol must be positive");
  const std::size_t n = points.rows, d = points.cols;
  GeometricMedianResult res;
  res.point = sample_mean(points);
  if (n == 1) {
    res.converged = true;
    res.objectives.push_back(0.0);
    return res;
  }
  constexpr double kAnchorEps = 1e-12;
  std::vector<double> next(d), resid(d);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    res.iterations = it;
    double wsum = 0.0, objective = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(resid.begin(), resid.end(), 0.0);
    std::size_t anchors = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = points.row(i);
      const double dist = dist_to_row(res.point, row, d);
      objective += dist;
      if (dist <= kAnchorEps) {
        ++anchors;
        continue;
      }
      const double w = 1.0 / dist;
      wsum += w;
      for (std::size_t c = 0; c < d; ++c) {
        next[c] += w * row[c];
        resid[c] += w * (row[c] - res.point[c]);
      }
    }
    res.objectives.push_back(objective);
    if (anchors > 0) {
      // Iterate sits on a data point of multiplicity `anchors`. It is the
      // minimizer iff the pull of the others does not exceed that mass;
      // otherwise shrink the plain Weiszfeld step toward the anchor.
      double rnorm = 0.0;
      for (double v : resid) rnorm += v * v;
      rnorm = std::sqrt(rnorm);
      if (rnorm <= static_cast<double>(anchors) || wsum == 0.0) {
        res.converged = true;
        return res;
      }
      const double shrink = static_cast<double>(anchors) / rnorm;
      for (std::size_t c = 0; c < d; ++c)
        next[c] = (1.0 - shrink) * (next[c] / wsum) + shrink * res.point[c];
    } else {
      for (std::size_t c = 0; c < d; ++c) next[c] /= wsum;
    }
    double step = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = next[c] - res.point[c];
      step += diff * diff;
    }
    res.point = next;
    if (std::sqrt(step) < tol) {
      res.converged = true;
      break;
    }
  }
  double final_obj = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    final_obj += dist_to_row(res.point, points.row(i), d);
  res.objectives.push_back(final_obj);
  return res;
}

namespace {

struct TopEig {
  double value = 0.0;
  std::vector<double> vector;
  bool ok = false;
};

TopEig power_iteration(const Matrix& cov, std::size_t max_iter, double rel_tol) {
  const std::size_t d = cov.rows;
  TopEig out;
  out.vector.assign(d, 0.0);
  // deterministic start: coordinate with the largest variance
  std::size_t j0 = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (cov(j, j) > cov(j0, j0)) j0 = j;
  out.vector[j0] = 1.0;
  std::vector<double> next(d);
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t r = 0; r < d; ++r) {
      const double* row = cov.row(r);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += row[c] * out.vector[c];
      next[r] = s;
    }
    double norm = 0.0;
    for (double v : next) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      out.value = 0.0;  // zero covariance: any direction works
      out.ok = true;
      return out;
    }
    for (std::size_t r = 0; r < d; ++r) out.vector[r] = next[r] / norm;
    // Rayleigh quotient of the normalized iterate
    double lam = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      const double* row = cov.row(r);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += row[c] * out.vector[c];
      lam += out.vector[r] * s;
    }
    if (it > 0 && std::fabs(lam - prev) <= rel_tol * std::max(std::fabs(lam), 1e-300)) {
      out.value = lam;
      out.ok = true;
      return out;
    }
    prev = lam;
    out.value = lam;
  }
  return out;  // ok stays false
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

FilterMeanResult filter_mean(const Matrix& points, double tau, double cher) {
  if (points.rows == 0) throw std::invalid_argument("filter_mean: empty point set");
  if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("filter_mean: tau must lie in (0, 1)");
  if (cher <= 0.0) throw std::invalid_argument("filter_mean: cher must be positive");
  const std::size_t d = points.cols;
  std::vector<std::size_t> alive(points.rows);
  std::iota(alive.begin(), alive.end(), 0);

  FilterMeanResult res;
  while (true) {
    ++res.iterations;
    const std::size_t n = alive.size();
    std::vector<double> mu(d, 0.0);
    for (std::size_t i : alive) {
      const double* r = points.row(i);
      for (std::size_t c = 0; c < d; ++c) mu[c] += r[c];
    }
    for (double& v : mu) v /= static_cast<double>(n);
    res.point = mu;
    if (n == 1) return res;  // nothing left to test against

    Matrix cov(d, d);
    std::vector<double> centered(d);
    for (std::size_t i : alive) {
      const double* r = points.row(i);
      for (std::size_t c = 0; c < d; ++c) centered[c] = r[c] - mu[c];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) cov(a, b) += centered[a] * centered[b];
    }
    for (double& v : cov.data) v /= static_cast<double>(n);

    const TopEig eig = power_iteration(cov, 1000, 1e-8);
    if (!eig.ok) {
      res.eigen_failed = true;
      res.point = sample_mean(points);  // fall back to the plain mean of the input
      return res;
    }

    double spherical;
    if (d > 1) {
      double trace = 0.0;
      for (std::size_t c = 0; c < d; ++c) trace += cov(c, c);
      spherical = (trace - eig.value) / static_cast<double>(d - 1);
    } else {
      // 1x1 covariance equals its own trace, so compare against a robust
      // variance of the projections instead.
      std::vector<double> proj;
      proj.reserve(n);
      for (std::size_t i : alive) proj.push_back(points(i, 0) - mu[0]);
      const double med = median_of(proj);
      std::vector<double> dev;
      dev.reserve(n);
      for (double p : proj) dev.push_back(std::fabs(p - med));
      const double mad = median_of(std::move(dev));
      const double sigma = 1.4826 * mad;
      spherical = sigma * sigma;
    }
    if (eig.value <= cher * spherical) return res;

    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(n);
    for (std::size_t i : alive) {
      const double* r = points.row(i);
      double p = 0.0;
      for (std::size_t c = 0; c < d; ++c) p += (r[c] - mu[c]) * eig.vector[c];
      scored.emplace_back(p * p, i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const std::size_t drop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n))));
    if (drop >= n)
      throw std::domain_error("filter_mean: filtering removed every point");
    std::vector<std::size_t> kept;
    kept.reserve(n - drop);
    for (std::size_t s = drop; s < n; ++s) kept.push_back(scored[s].second);
    std::sort(kept.begin(), kept.end());
    res.removed += drop;
    alive = std::move(kept);
  }
}

namespace {

std::vector<double> moment_features(const std::vector<double>& values,
                                    std::size_t max_power) {
  if (values.empty())
    throw std::invalid_argument("moment features: empty value set");
  std::vector<double> f(max_power + 1, 1.0);
  std::vector<double> pow_buf(values.size(), 1.0);
  for (std::size_t k = 1; k <= max_power; ++k) {
    for (std::size_t i = 0; i < values.size(); ++i) pow_buf[i] *= values[i];
    f[k] = multiset_mean(pow_buf);
  }
  return f;
}

}  // namespace

double MomentRegressor::predict(const std::vector<double>& values) const {
  const std::vector<double> f = moment_features(values, max_power);
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += coef[k] * f[k];
  return s;
}

MomentRegressor fit_moment_regressor(const std::vector<std::vector<double>>& value_sets,
                                     const std::vector<double>& targets,
                                     std::size_t max_power, double ridge) {
  if (value_sets.empty()) throw std::invalid_argument("fit_moment_regressor: no training sets");
  if (value_sets.size() != targets.size())
    throw std::invalid_argument("fit_moment_regressor: sets/targets count mismatch");
  if (ridge < 0.0) throw std::invalid_argument("fit_moment_regressor: ridge must be >= 0");
  const std::size_t p = max_power + 1;
  Matrix normal(p, p);
  std::vector<double> rhs(p, 0.0);
  for (std::size_t s = 0; s < value_sets.size(); ++s) {
    const std::vector<double> f = moment_features(value_sets[s], max_power);
    for (std::size_t a = 0; a < p; ++a) {
      rhs[a] += f[a] * targets[s];
      for (std::size_t b = 0; b < p; ++b) normal(a, b) += f[a] * f[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a) normal(a, a) += ridge;
  MomentRegressor reg;
  reg.max_power = max_power;
  try {
    reg.coef = solve_linear(std::move(normal), std::move(rhs));
  } catch (const std::domain_error&) {
    throw std::domain_error(
        "fit_moment_regressor: normal equations are singular; pass ridge > 0");
  }
  return reg;
}

}  // namespace measurenet
