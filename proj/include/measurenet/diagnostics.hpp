#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "measurenet/matrix.hpp"
#include "measurenet/rng.hpp"
#include "measurenet/targets.hpp"

namespace measurenet {

// Exact Wasserstein-1 distance between the empirical measures of two 1-D
// value multisets. Equal sizes: mean |a_(i) - b_(i)| over the sorted values.
// Unequal sizes: the quantile functions are piecewise constant on the merged
// grid of i/P and j/Q breakpoints, so the integral is a finite weighted sum
// with integer segment lengths in units of 1/(P*Q).
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

using ValueFn = std::function<double(const std::vector<double>&)>;

// The 1-D value form of a target (the kernel applied after the inverse-norm
// map, here applied to raw values). Only the closed-form kinds have one;
// neuron, potential and the robust latent kinds are a domain error.
ValueFn value_function(const TargetSpec& spec);

struct ContinuityReport {
  std::string target;
  std::size_t pairs = 0;    // probed pairs with positive distance
  double max_ratio = 0.0;   // max |f(a) - f(b)| / W1(a, b)
  std::vector<double> quantile_levels;
  std::vector<double> quantile_values;
  // Ratio on the pair ({0,...,0}, {0,...,0,1}) of size N, for each N in the
  // requested grid. For the hard-max target this equals N exactly; for any
  // 1-Lipschitz target it stays <= 1.
  std::vector<std::pair<std::size_t, double>> adversarial;
};

// Lipschitz-ratio probe of a symmetric value function: `random_pairs` pairs
// of sets drawn from `sampler`, pooled with the adversarial family above.
// Ratios are recorded only when the pair is at positive distance. Quantiles
// are empirical order statistics at levels {0.5, 0.9, 0.99}.
ContinuityReport continuity_modulus(const std::string& name, const ValueFn& f,
                                    const std::function<std::vector<double>(Rng&)>& sampler,
                                    std::size_t random_pairs,
                                    const std::vector<std::size_t>& adversarial_sizes,
                                    Rng& rng);
ContinuityReport continuity_modulus(const TargetSpec& spec,
                                    const std::function<std::vector<double>(Rng&)>& sampler,
                                    std::size_t random_pairs,
                                    const std::vector<std::size_t>& adversarial_sizes,
                                    Rng& rng);

// |f(S) - f(duplicate-each-element-k-times(S))|. Functions that extend to
// measures must make this exactly zero; it is the cheap necessary condition
// for W1-continuity.
double duplication_check(const ValueFn& f, const std::vector<double>& values,
                         std::size_t k);
double duplication_check(const TargetSpec& spec, const Matrix& set, std::size_t k);

struct SoftmaxBound {
  double gap = 0.0;    // max(v) - (1/lambda) log(mean exp(lambda v))
  double bound = 0.0;  // log(N) / lambda
  bool ok = false;     // gap <= bound (analytically always true)
};

// Checks the uniform gap between the hard max and its normalized log-sum-exp
// smoothing against the log(N)/lambda bound.
SoftmaxBound softmax_bound_check(const std::vector<double>& values, double lambda);

struct ConcentrationRow {
  std::size_t n = 0;
  double mean_w1 = 0.0;
};

// Mean W1 distance between a size-N sample and one large reference sample of
// the same 1-D distribution, per N in the grid. The reference stands in for
// the population measure, which biases every entry upward by roughly the
// reference's own distance to the population (~reference_size^{-1/2}); with
// the default 1e5-point reference that floor sits well below the probed Ns.
std::vector<ConcentrationRow> empirical_concentration(
    const std::function<double(Rng&)>& dist, const std::vector<std::size_t>& n_grid,
    std::size_t trials, Rng& rng, std::size_t reference_size = 100000);

}  // namespace measurenet
