#pragma once

#include <memory>
#include <string>
#include <vector>

#include "measurenet/matrix.hpp"
#include "measurenet/model.hpp"

namespace measurenet {

// Symmetric functions of a 1-D value multiset. Reductions go through the
// canonical-order compensated sum, so each of these depends only on the
// multiset (permutation invariance holds bit for bit) and duplicating every
// value k times reproduces the invariant ones exactly.
double value_max(const std::vector<double>& v);
double value_mean(std::vector<double> v);
double value_median(std::vector<double> v);           // even count: midpoint of the middle two
double value_second_largest(std::vector<double> v);   // needs >= 2 values
// lambda * log(sum exp(v/lambda)): the learning-target smoothing of max.
// Grows by lambda*log k under duplication, deliberately.
double value_softmax(const std::vector<double>& v, double lambda);
// (1/lambda) * log(mean exp(lambda v)): the duplication-invariant smooth max
// whose gap to the true max is bounded by log(count)/lambda.
double value_logmeanexp(const std::vector<double>& v, double lambda);

// 1 / ||x_i|| per point. A zero point is a domain error.
std::vector<double> inverse_norms(const Matrix& points);

enum class TargetKind {
  max_inv,
  softmax_inv,
  median_inv,
  second_largest_inv,
  mean_inv,
  potential,
  neuron,
  smooth_neuron,
  robust_mean_truth,
};

const char* target_name(TargetKind k);
TargetKind target_from_name(const std::string& name);

struct TargetSpec {
  TargetKind kind = TargetKind::mean_inv;
  double lambda = 0.1;  // softmax_inv temperature
  std::shared_ptr<const MeasureNet> planted;  // neuron / smooth_neuron only
};

// Scalar label for one point set. The neuron kinds evaluate their planted
// network with per-unit multiset pooling, so they are exactly permutation
// invariant like the closed-form kinds. robust_mean_truth is rejected here:
// that label is latent and comes from the sampler.
double eval_target(const TargetSpec& spec, const Matrix& points);

// Planted test functions sharing the model parameterization. `neuron` is a
// single hidden unit per layer with the first layer drawn elementwise from
// 0.5 N(+1, 0.5^2) + 0.5 N(-1, 0.5^2); `smooth_neuron` is a width-100 first
// layer, Kaiming everywhere, whose first layer can be copied into a model
// via share_first_layer.
TargetSpec make_planted_neuron(TargetKind kind, std::size_t d, std::uint64_t seed);

// Interaction-energy target: mean over unordered pairs of 1/||x_i - x_j||.
// Declared separately from eval_target only for documentation; eval_target
// dispatches here. Coincident points are a domain error.
double pairwise_potential(const Matrix& points);

// Gibbs readout of a 1-D sample: the mean of t weighted by
// exp(-beta * mean_i |t - v_i|) over [lo, hi], by trapezoid quadrature on
// `nodes` points with log-sum-exp stabilization. Converges to the sample
// median as beta grows.
double gibbs_estimate(const std::vector<double>& values, double beta, double lo,
                      double hi, std::size_t nodes);

}  // namespace measurenet
