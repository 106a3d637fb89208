#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "measurenet/diagnostics.hpp"
#include "measurenet/rng.hpp"
#include "support/w1_oracle.hpp"

using namespace measurenet;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng, double lo = -3.0,
                                  double hi = 3.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("transport distance on hand-checkable pairs") {
    CHECK(wasserstein1_1d({0.0, 1.0}, {0.0, 0.0}) == 0.5);
    CHECK(wasserstein1_1d({0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 1.0}) == 0.25);
    CHECK(wasserstein1_1d({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(wasserstein1_1d({0.0}, {1.0}) == 1.0);
    // shift invariance of mass: {0} vs {0,1} moves half a unit
    CHECK(wasserstein1_1d({0.0}, {0.0, 1.0}) == 0.5);
    CHECK_THROWS_AS(wasserstein1_1d({}, {1.0}), std::invalid_argument);
  }

  TEST_CASE("transport distance ignores input order and duplication") {
    CHECK(wasserstein1_1d({3.0, 1.0, 2.0}, {2.0, 3.0, 1.0}) == 0.0);
    // duplicated multisets represent the same measure
    CHECK(wasserstein1_1d({0.0, 1.0, 0.0, 1.0}, {0.0, 1.0}) == 0.0);
    CHECK(wasserstein1_1d({0.5, 0.5, 0.5}, {0.5}) == 0.0);
  }

  TEST_CASE("equal sizes agree with the exhaustive assignment optimum") {
    Rng rng(901);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 5);
      const auto a = random_values(n, rng);
      const auto b = random_values(n, rng);
      const double got = wasserstein1_1d(a, b);
      const double want = w1_oracle::assignment_brute_force(a, b);
      CHECK(std::fabs(got - want) <= 1e-12);
    }
  }

  TEST_CASE("unequal sizes agree with the northwest-corner transport optimum") {
    Rng rng(902);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t p = 1 + static_cast<std::size_t>(rng.uniform() * 5);
      std::size_t q = 1 + static_cast<std::size_t>(rng.uniform() * 5);
      if (q == p) q = p % 5 + 1;
      const auto a = random_values(p, rng);
      const auto b = random_values(q, rng);
      const double got = wasserstein1_1d(a, b);
      const double want = w1_oracle::transport_northwest(a, b);
      CHECK(std::fabs(got - want) <= 1e-12);
    }
  }

  TEST_CASE("tiny unequal pairs also agree with replicated exhaustive search") {
    // 2 vs 3 points: replicate to 6 on each side and brute-force all 720
    // assignments; fully independent of any transport theory.
    Rng rng(903);
    for (int rep = 0; rep < 20; ++rep) {
      const auto a = random_values(2, rng);
      const auto b = random_values(3, rng);
      std::vector<double> a6 = {a[0], a[0], a[0], a[1], a[1], a[1]};
      std::vector<double> b6 = {b[0], b[0], b[1], b[1], b[2], b[2]};
      const double want = w1_oracle::assignment_brute_force(a6, b6);
      CHECK(std::fabs(wasserstein1_1d(a, b) - want) <= 1e-12);
    }
  }

  TEST_CASE("metric axioms hold with tight slack") {
    Rng rng(904);
    for (int rep = 0; rep < 100; ++rep) {
      const auto a = random_values(1 + rep % 7, rng);
      const auto b = random_values(1 + (rep * 3) % 7, rng);
      const auto c = random_values(1 + (rep * 5) % 7, rng);
      const double ab = wasserstein1_1d(a, b);
      const double ba = wasserstein1_1d(b, a);
      CHECK(ab == ba);  // symmetry is exact by construction
      CHECK(ab >= 0.0);
      const double ac = wasserstein1_1d(a, c);
      const double bc = wasserstein1_1d(b, c);
      CHECK(ac <= ab + bc + 1e-12);
      CHECK(wasserstein1_1d(a, a) == 0.0);
    }
  }

  TEST_CASE("value_function covers the closed-form kinds only") {
    TargetSpec spec;
    spec.kind = TargetKind::mean_inv;
    CHECK(value_function(spec)({1.0, 3.0}) == 2.0);
    spec.kind = TargetKind::softmax_inv;
    spec.lambda = 1.0;
    CHECK(value_function(spec)({0.0, 1.0}) ==
          doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-14));
    spec.kind = TargetKind::potential;
    CHECK_THROWS_AS(value_function(spec), std::domain_error);
    spec.kind = TargetKind::neuron;
    CHECK_THROWS_AS(value_function(spec), std::domain_error);
  }

  TEST_CASE("the adversarial family exposes the hard max exactly") {
    // {0,...,0} vs {0,...,0,1}: distance 1/N, max jumps by 1, ratio N
    TargetSpec spec;
    spec.kind = TargetKind::max_inv;
    Rng rng(905);
    auto sampler = [](Rng& r) { return random_values(4, r); };
    const ContinuityReport rep =
        continuity_modulus(spec, sampler, 50, {2, 4, 8, 16}, rng);
    REQUIRE(rep.adversarial.size() == 4);
    for (const auto& [n, ratio] : rep.adversarial)
      CHECK(ratio == static_cast<double>(n));
    CHECK(rep.max_ratio >= 16.0);
    CHECK(rep.pairs >= 50);
  }

  TEST_CASE("the mean stays 1-Lipschitz even on adversarial pairs") {
    TargetSpec spec;
    spec.kind = TargetKind::mean_inv;
    Rng rng(906);
    auto sampler = [](Rng& r) {
      return random_values(2 + static_cast<std::size_t>(r.uniform() * 14), r);
    };
    const ContinuityReport rep =
        continuity_modulus(spec, sampler, 200, {2, 4, 8, 16}, rng);
    CHECK(rep.max_ratio <= 1.0 + 1e-9);
    for (const auto& [n, ratio] : rep.adversarial) CHECK(ratio == 1.0);
    REQUIRE(rep.quantile_levels.size() == 3);
    CHECK(rep.quantile_values[0] <= rep.quantile_values[2]);
  }

  TEST_CASE("continuity probe is deterministic in the given stream") {
    TargetSpec spec;
    spec.kind = TargetKind::median_inv;
    auto sampler = [](Rng& r) { return random_values(6, r); };
    Rng r1(907), r2(907);
    const ContinuityReport a = continuity_modulus(spec, sampler, 40, {2}, r1);
    const ContinuityReport b = continuity_modulus(spec, sampler, 40, {2}, r2);
    CHECK(a.max_ratio == b.max_ratio);
    CHECK(a.quantile_values == b.quantile_values);
  }

  TEST_CASE("duplication gaps: zero for measure functions, positive otherwise") {
    Rng rng(908);
    const auto v = random_values(9, rng);
    const ValueFn mean = [](const std::vector<double>& x) { return value_mean(x); };
    const ValueFn median = [](const std::vector<double>& x) { return value_median(x); };
    const ValueFn maxf = [](const std::vector<double>& x) { return value_max(x); };
    const ValueFn lme = [](const std::vector<double>& x) { return value_logmeanexp(x, 1.0); };
    for (std::size_t k : {2, 3}) {
      CHECK(duplication_check(mean, v, k) == 0.0);
      CHECK(duplication_check(median, v, k) == 0.0);
      CHECK(duplication_check(maxf, v, k) == 0.0);
      CHECK(duplication_check(lme, v, k) == 0.0);
    }
    const ValueFn second = [](const std::vector<double>& x) {
      return value_second_largest(x);
    };
    CHECK(duplication_check(second, {1.0, 2.0}, 2) == 1.0);
    CHECK_THROWS_AS(duplication_check(mean, v, 0), std::invalid_argument);
  }

  TEST_CASE("smooth-max gap respects the log(N)/lambda bound") {
    // {0,1} at lambda 1: gap = 1 - log((1+e)/2), bound = log 2
    const SoftmaxBound hand = softmax_bound_check({0.0, 1.0}, 1.0);
    CHECK(hand.gap ==
          doctest::Approx(1.0 - std::log((1.0 + std::exp(1.0)) / 2.0)).epsilon(1e-12));
    CHECK(hand.bound == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(hand.ok);

    Rng rng(909);
    for (double lambda : {0.1, 1.0, 10.0}) {
      for (int rep = 0; rep < 200; ++rep) {
        const auto v = random_values(1 + rep % 64, rng, -5.0, 5.0);
        const SoftmaxBound sb = softmax_bound_check(v, lambda);
        CHECK(sb.ok);
        CHECK(sb.gap >= -1e-12);
      }
    }
    CHECK_THROWS_AS(softmax_bound_check({}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_bound_check({1.0}, 0.0), std::invalid_argument);
  }

  TEST_CASE("a single value has zero smoothing gap") {
    const SoftmaxBound sb = softmax_bound_check({2.5}, 0.7);
    CHECK(sb.gap == 0.0);
    CHECK(sb.bound == 0.0);
    CHECK(sb.ok);
  }

  TEST_CASE("empirical concentration decays roughly like 1/sqrt(N)") {
    Rng rng(910);
    auto uniform01 = [](Rng& r) { return r.uniform(); };
    const auto table =
        empirical_concentration(uniform01, {16, 64, 256}, 30, rng, 20000);
    REQUIRE(table.size() == 3);
    CHECK(table[0].mean_w1 > table[1].mean_w1);
    CHECK(table[1].mean_w1 > table[2].mean_w1);
    // quadrupling N should roughly halve the distance
    const double decay1 = table[0].mean_w1 / table[1].mean_w1;
    const double decay2 = table[1].mean_w1 / table[2].mean_w1;
    CHECK(decay1 > 1.4);
    CHECK(decay1 < 2.9);
    CHECK(decay2 > 1.3);
    CHECK(decay2 < 2.9);
    CHECK_THROWS_AS(empirical_concentration(uniform01, {4}, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(empirical_concentration(uniform01, {0}, 1, rng), std::invalid_argument);
  }
}
