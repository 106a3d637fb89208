#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "measurenet/estimators.hpp"
#include "measurenet/rng.hpp"

using namespace measurenet;

namespace {

double objective_at(const std::vector<double>& y, const Matrix& points) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < points.cols; ++c) {
      const double diff = points(i, c) - y[c];
      d2 += diff * diff;
    }
    s += std::sqrt(d2);
  }
  return s;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("sample_mean is the coordinatewise average") {
    Matrix p(3, 2);
    p.data = {1.0, 10.0, 2.0, 20.0, 3.0, 30.0};
    const auto m = sample_mean(p);
    CHECK(m[0] == 2.0);
    CHECK(m[1] == 20.0);
    Matrix empty(0, 2);
    CHECK_THROWS_AS(sample_mean(empty), std::invalid_argument);
  }

  TEST_CASE("geometric median of a symmetric cross is the center") {
    Matrix p(4, 2);
    p.data = {1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0};
    const auto res = geometric_median(p);
    CHECK(res.converged);
    CHECK(std::fabs(res.point[0]) < 1e-9);
    CHECK(std::fabs(res.point[1]) < 1e-9);
  }

  TEST_CASE("geometric median in one dimension is the sample median") {
    Matrix p(3, 1);
    p.data = {0.0, 1.0, 10.0};
    const auto res = geometric_median(p);
    CHECK(std::fabs(res.point[0] - 1.0) < 1e-3);
  }

  TEST_CASE("an iterate landing exactly on a balanced data point stays there") {
    // mean of the four points is (0,0), itself a data point, and the pull of
    // the other three cancels below its unit multiplicity
    Matrix p(4, 2);
    p.data = {0.0, 0.0, 0.0, 4.0, 3.0, 0.0, -3.0, -4.0};
    const auto res = geometric_median(p);
    CHECK(res.converged);
    CHECK(res.point[0] == 0.0);
    CHECK(res.point[1] == 0.0);
    CHECK(res.iterations == 1);
  }

  TEST_CASE("a repeated point with majority mass is the median") {
    Matrix p(4, 2);
    p.data = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0};
    const auto res = geometric_median(p);
    CHECK(res.converged);
    CHECK(std::fabs(res.point[0]) < 1e-6);
    CHECK(std::fabs(res.point[1]) < 1e-6);
  }

  TEST_CASE("weiszfeld objective never increases and ends near-optimal") {
    Rng rng(606);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 10);
      const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * 4);
      Matrix p(n, d);
      for (double& v : p.data) v = rng.uniform(-5.0, 5.0);
      const auto res = geometric_median(p);
      REQUIRE(res.objectives.size() >= 1);
      for (std::size_t i = 1; i < res.objectives.size(); ++i)
        CHECK(res.objectives[i] <= res.objectives[i - 1] + 1e-9);
      // first-order check: random small perturbations only make it worse
      const double base = objective_at(res.point, p);
      for (int t = 0; t < 8; ++t) {
        std::vector<double> y = res.point;
        for (double& c : y) c += rng.uniform(-1e-4, 1e-4);
        CHECK(objective_at(y, p) >= base - 1e-7);
      }
    }
  }

  TEST_CASE("geometric median argument checks") {
    Matrix empty(0, 2);
    CHECK_THROWS_AS(geometric_median(empty), std::invalid_argument);
    Matrix one(1, 3);
    one.data = {1.0, 2.0, 3.0};
    const auto res = geometric_median(one);
    CHECK(res.converged);
    CHECK(res.point == std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THROWS_AS(geometric_median(one, 0.0), std::invalid_argument);
  }

  TEST_CASE("filter_mean removes a gross 1-D outlier, hand-traced") {
    Matrix p(4, 1);
    p.data = {0.0, 0.1, -0.1, 10.0};
    const auto res = filter_mean(p, 0.34, 1.5);
    // round 1 drops {10, -0.1} (top two squared projections), round 2 accepts
    CHECK(res.removed == 2);
    CHECK(res.point[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_FALSE(res.eigen_failed);
  }

  TEST_CASE("filter_mean recovers the bulk despite planted outliers") {
    Rng rng(707);
    const std::size_t d = 4;
    Matrix p(110, d);
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t c = 0; c < d; ++c) p(i, c) = rng.normal(0.0, 0.1);
    for (std::size_t i = 100; i < 110; ++i)
      for (std::size_t c = 0; c < d; ++c) p(i, c) = 10.0 + rng.normal(0.0, 0.1);
    const auto res = filter_mean(p, 0.1, 1.5);
    CHECK(res.removed >= 10);
    double norm = 0.0;
    for (double v : res.point) norm += v * v;
    CHECK(std::sqrt(norm) < 0.3);

    // the contaminated plain mean sits far away
    double contaminated = 0.0;
    const auto sm = sample_mean(p);
    for (double v : sm) contaminated += v * v;
    CHECK(std::sqrt(contaminated) > 1.0);
  }

  TEST_CASE("filter_mean on clean spherical data stops without removals") {
    Rng rng(708);
    Matrix p(500, 3);
    for (double& v : p.data) v = rng.normal(0.0, 1.0);
    const auto res = filter_mean(p, 0.1, 1.5);
    CHECK(res.removed == 0);
    CHECK(res.iterations == 1);
  }

  TEST_CASE("filter_mean argument checks") {
    Matrix p(3, 1);
    p.data = {0.0, 1.0, 2.0};
    CHECK_THROWS_AS(filter_mean(p, 0.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(filter_mean(p, 1.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(filter_mean(p, 0.1, 0.0), std::invalid_argument);
    Matrix empty(0, 1);
    CHECK_THROWS_AS(filter_mean(empty), std::invalid_argument);
    Matrix one(1, 2);
    one.data = {4.0, 5.0};
    const auto res = filter_mean(one);
    CHECK(res.point == std::vector<double>{4.0, 5.0});
  }

  TEST_CASE("moment regressor recovers the mean functional exactly") {
    Rng rng(808);
    std::vector<std::vector<double>> sets;
    std::vector<double> targets;
    for (int s = 0; s < 40; ++s) {
      std::vector<double> v(3 + static_cast<std::size_t>(rng.uniform() * 6));
      for (double& x : v) x = rng.uniform(-2.0, 2.0);
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      sets.push_back(std::move(v));
      targets.push_back(mean);
    }
    const MomentRegressor reg = fit_moment_regressor(sets, targets, 1, 0.0);
    CHECK(std::fabs(reg.coef[0]) < 1e-10);
    CHECK(reg.coef[1] == doctest::Approx(1.0).epsilon(1e-10));
    std::vector<double> fresh = {0.3, -1.2, 2.0, 0.5};
    CHECK(reg.predict(fresh) == doctest::Approx(0.4).epsilon(1e-10));
  }

  TEST_CASE("moment regressor predictions are duplication invariant") {
    MomentRegressor reg;
    reg.max_power = 2;
    reg.coef = {1.0, 2.0, 3.0};
    const std::vector<double> v = {1.0, 2.0};
    // features {1, 1.5, 2.5} -> 1 + 3 + 7.5
    CHECK(reg.predict(v) == doctest::Approx(11.5).epsilon(1e-15));
    const std::vector<double> dup = {1.0, 2.0, 1.0, 2.0, 1.0, 2.0};
    CHECK(reg.predict(dup) == reg.predict(v));
  }

  TEST_CASE("singular normal equations point at the ridge escape hatch") {
    // identical sets make the design rank 1
    std::vector<std::vector<double>> sets(5, std::vector<double>{1.0, 2.0});
    std::vector<double> targets(5, 1.5);
    CHECK_THROWS_WITH_AS(fit_moment_regressor(sets, targets, 2, 0.0),
                         doctest::Contains("ridge > 0"), std::domain_error);
    const MomentRegressor reg = fit_moment_regressor(sets, targets, 2, 1e-6);
    CHECK(reg.predict({1.0, 2.0}) == doctest::Approx(1.5).epsilon(1e-3));
    CHECK_THROWS_AS(fit_moment_regressor({}, {}, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_moment_regressor(sets, {1.0}, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_moment_regressor(sets, targets, 1, -1.0), std::invalid_argument);
  }
}
