#pragma once

#include <cstddef>
#include <vector>

#include "measurenet/data.hpp"
#include "measurenet/matrix.hpp"

namespace measurenet {

// Coordinatewise mean of the rows.
std::vector<double> sample_mean(const Matrix& points);

struct GeometricMedianResult {
  std::vector<double> point;
  bool converged = false;
  std::size_t iterations = 0;
  // Sum-of-distances objective at the start of each iteration plus the final
  // iterate; monotone non-increase is part of the contract and is tested.
  std::vector<double> objectives;
};

// Weiszfeld iteration from the sample mean, with the standard correction
// when an iterate lands on a data point: if the residual pull of the other
// points is within the anchor's multiplicity the point is optimal, otherwise
// the iterate steps off along the residual. The minimized objective (sum of
// distances) never increases across iterations.
GeometricMedianResult geometric_median(const Matrix& points, double tol = 1e-9,
                                       std::size_t max_iter = 10000);

struct FilterMeanResult {
  std::vector<double> point;
  std::size_t iterations = 0;
  std::size_t removed = 0;
  bool eigen_failed = false;  // power iteration stalled; fell back to the survivor mean
};

// Iterative spectral filtering: compute mean and covariance of the surviving
// points, estimate the top eigenvalue by power iteration, stop once it is
// within `cher` of the spherical level of the remaining spectrum, otherwise
// drop the ceil(tau * n) points scoring highest along the top eigenvector.
// In one dimension the spherical level is replaced by a scaled-MAD variance
// of the projections, since a 1x1 covariance is its own trace.
FilterMeanResult filter_mean(const Matrix& points, double tau = 0.1, double cher = 1.5);

// Ridge regression on moment features of a 1-D value multiset:
// [1, mean(v), mean(v^2), ..., mean(v^max_power)]. Features depend only on
// the multiset, so predictions are invariant to duplication of the sample.
struct MomentRegressor {
  std::size_t max_power = 0;
  std::vector<double> coef;  // max_power + 1 entries

  double predict(const std::vector<double>& values) const;
};

// Least squares via the normal equations with `ridge` added to the diagonal.
// A singular system with ridge = 0 throws std::domain_error suggesting a
// positive ridge.
MomentRegressor fit_moment_regressor(const std::vector<std::vector<double>>& value_sets,
                                     const std::vector<double>& targets,
                                     std::size_t max_power, double ridge);

}  // namespace measurenet
