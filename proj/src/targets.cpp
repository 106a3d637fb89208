#include "measurenet/targets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "measurenet/summation.hpp"

namespace measurenet {

namespace {

void require_nonempty(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty value set");
}

}  // namespace

double value_max(const std::vector<double>& v) {
  require_nonempty(v, "value_max");
  return *std::max_element(v.begin(), v.end());
}

double value_mean(std::vector<double> v) {
  require_nonempty(v, "value_mean");
  return multiset_mean(std::move(v));
}

double value_median(std::vector<double> v) {
  require_nonempty(v, "value_median");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double value_second_largest(std::vector<double> v) {
  if (v.size() < 2)
    throw std::invalid_argument("value_second_largest: needs at least 2 values");
  std::sort(v.begin(), v.end());
  return v[v.size() - 2];
}

double value_softmax(const std::vector<double>& v, double lambda) {
  require_nonempty(v, "value_softmax");
  if (lambda <= 0.0) throw std::invalid_argument("value_softmax: lambda must be positive");
  const double m = value_max(v) / lambda;
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] / lambda - m);
  return lambda * (m + std::log(multiset_sum(std::move(e))));
}

double value_logmeanexp(const std::vector<double>& v, double lambda) {
  require_nonempty(v, "value_logmeanexp");
  if (lambda <= 0.0) throw std::invalid_argument("value_logmeanexp: lambda must be positive");
  const double m = lambda * value_max(v);
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(lambda * v[i] - m);
  return (m + std::log(multiset_mean(std::move(e)))) / lambda;
}

std::vector<double> inverse_norms(const Matrix& points) {
  std::vector<double> out(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const double* r = points.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < points.cols; ++j) s += r[j] * r[j];
    if (s == 0.0)
      throw std::domain_error("inverse_norms: point " + std::to_string(i) + " is zero");
    out[i] = 1.0 / std::sqrt(s);
  }
  return out;
}

const char* target_name(TargetKind k) {
  switch (k) {
    case TargetKind::max_inv: return "max_inv";
    case TargetKind::softmax_inv: return "softmax_inv";
    case TargetKind::median_inv: return "median_inv";
    case TargetKind::second_largest_inv: return "second_inv";
    case TargetKind::mean_inv: return "mean_inv";
    case TargetKind::potential: return "potential";
    case TargetKind::neuron: return "neuron";
    case TargetKind::smooth_neuron: return "smooth_neuron";
    case TargetKind::robust_mean_truth: return "robust_mean_truth";
  }
  throw std::invalid_argument("target_name: bad enum value");
}

TargetKind target_from_name(const std::string& name) {
  if (name == "max_inv") return TargetKind::max_inv;
  if (name == "softmax_inv") return TargetKind::softmax_inv;
  if (name == "median_inv") return TargetKind::median_inv;
  if (name == "second_inv") return TargetKind::second_largest_inv;
  if (name == "mean_inv") return TargetKind::mean_inv;
  if (name == "potential") return TargetKind::potential;
  if (name == "neuron") return TargetKind::neuron;
  if (name == "smooth_neuron") return TargetKind::smooth_neuron;
  if (name == "robust_mean_truth") return TargetKind::robust_mean_truth;
  throw std::invalid_argument("unknown target '" + name + "'");
}

double pairwise_potential(const Matrix& points) {
  const std::size_t n = points.rows, d = points.cols;
  if (n < 2) throw std::invalid_argument("pairwise_potential: needs at least 2 points");
  std::vector<double> terms;
  terms.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* a = points.row(i);
      const double* b = points.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = a[c] - b[c];
        s += diff * diff;
      }
      if (s == 0.0) {
        throw std::domain_error("pairwise_potential: points " + std::to_string(i) +
                                " and " + std::to_string(j) + " coincide");
      }
      terms.push_back(1.0 / std::sqrt(s));
    }
  }
  return multiset_mean(std::move(terms));
}

namespace {

// Planted-network evaluation with per-unit multiset pooling: same function
// as model forward(), but the average over points is canonical-order summed
// so the target inherits exact permutation invariance.
double eval_planted(const MeasureNet& net, const Matrix& points) {
  if (points.cols != net.input_dim())
    throw std::invalid_argument("eval_target: point dimension does not match planted net");
  const std::size_t n = points.rows, d = points.cols;
  const std::size_t h1 = net.h1(), h2 = net.h2();
  std::vector<double> pooled(h1);
  std::vector<double> unit(n);
  for (std::size_t h = 0; h < h1; ++h) {
    const double* wrow = net.w1.row(h);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = points.row(i);
      double z = wrow[d] * net.aug;
      for (std::size_t c = 0; c < d; ++c) z += wrow[c] * x[c];
      unit[i] = activate(net.act1, z);
    }
    pooled[h] = multiset_mean(unit);
  }
  std::vector<double> a2(h2);
  for (std::size_t j = 0; j < h2; ++j) {
    const double* wrow = net.w2.row(j);
    double s = 0.0;
    for (std::size_t h = 0; h < h1; ++h) s += wrow[h] * pooled[h];
    a2[j] = activate(net.act2, s);
  }
  const double* w3 = net.w3.row(0);
  double out = 0.0;
  for (std::size_t j = 0; j < h2; ++j) out += w3[j] * a2[j];
  return out;
}

}  // namespace

double eval_target(const TargetSpec& spec, const Matrix& points) {
  if (points.rows == 0) throw std::invalid_argument("eval_target: empty point set");
  switch (spec.kind) {
    case TargetKind::max_inv: return value_max(inverse_norms(points));
    case TargetKind::softmax_inv: return value_softmax(inverse_norms(points), spec.lambda);
    case TargetKind::median_inv: return value_median(inverse_norms(points));
    case TargetKind::second_largest_inv:
      return value_second_largest(inverse_norms(points));
    case TargetKind::mean_inv: return value_mean(inverse_norms(points));
    case TargetKind::potential: return pairwise_potential(points);
    case TargetKind::neuron:
    case TargetKind::smooth_neuron:
      if (!spec.planted)
        throw std::invalid_argument("eval_target: neuron target has no planted network");
      return eval_planted(*spec.planted, points);
    case TargetKind::robust_mean_truth:
      throw std::domain_error(
          "eval_target: robust_mean_truth is latent; the robust sampler supplies it");
  }
  throw std::invalid_argument("eval_target: bad enum value");
}

TargetSpec make_planted_neuron(TargetKind kind, std::size_t d, std::uint64_t seed) {
  if (kind != TargetKind::neuron && kind != TargetKind::smooth_neuron)
    throw std::invalid_argument("make_planted_neuron: kind must be neuron or smooth_neuron");
  Rng rng(seed);
  auto net = std::make_shared<MeasureNet>();
  net->cls = ModelClass::s1;
  net->act1 = Act::relu;
  net->act2 = Act::relu;
  net->aug = default_aug(d);
  const std::size_t h1 = kind == TargetKind::neuron ? 1 : 100;
  net->w1 = Matrix(h1, d + 1);
  net->w2 = Matrix(1, h1);
  net->w3 = Matrix(1, 1);
  if (kind == TargetKind::neuron) {
    fill_gaussian_mixture(net->w1, 0.5, rng);
  } else {
    fill_kaiming_uniform(net->w1, d + 1, rng);
  }
  fill_kaiming_uniform(net->w2, h1, rng);
  fill_kaiming_uniform(net->w3, 1, rng);
  TargetSpec spec;
  spec.kind = kind;
  spec.planted = std::move(net);
  return spec;
}

double gibbs_estimate(const std::vector<double>& values, double beta, double lo,
                      double hi, std::size_t nodes) {
  if (values.empty()) throw std::invalid_argument("gibbs_estimate: empty value set");
  if (!(hi > lo)) throw std::invalid_argument("gibbs_estimate: domain must satisfy lo < hi");
  if (nodes < 2) throw std::invalid_argument("gibbs_estimate: needs at least 2 nodes");
  if (beta < 0.0) throw std::invalid_argument("gibbs_estimate: beta must be >= 0");

  const double h = (hi - lo) / static_cast<double>(nodes - 1);
  // log-weights -beta * E(t); the common max is subtracted before exp so a
  // large beta cannot underflow everything to zero.
  std::vector<double> logw(nodes);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = lo + h * static_cast<double>(k);
    double e = 0.0;
    for (double v : values) e += std::fabs(t - v);
    e /= static_cast<double>(values.size());
    logw[k] = -beta * e;
    m = std::max(m, logw[k]);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = lo + h * static_cast<double>(k);
    const double c = (k == 0 || k == nodes - 1) ? 0.5 : 1.0;  // trapezoid ends
    const double w = c * std::exp(logw[k] - m);
    num += w * t;
    den += w;
  }
  return num / den;
}

}  // namespace measurenet
