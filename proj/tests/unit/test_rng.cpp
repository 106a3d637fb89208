#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"
#include "measurenet/rng.hpp"

using namespace measurenet;

TEST_SUITE("rng") {
  TEST_CASE("mix64 matches independently computed finalizer values") {
    CHECK(mix64(0) == 0x0ull);
    CHECK(mix64(1) == 0x5692161d100b05e5ull);
    CHECK(mix64(0x0123456789abcdefull) == 0xb2c058e4ebb5112cull);
  }

  TEST_CASE("the raw stream matches the published splitmix64 vectors") {
    Rng r0(0);
    CHECK(r0.next_u64() == 0xe220a8397b1dcdafull);
    CHECK(r0.next_u64() == 0x6e789e6aa1b965f4ull);
    CHECK(r0.next_u64() == 0x06c45d188009454full);
    Rng r42(42);
    CHECK(r42.next_u64() == 0xbdd732262feb6e95ull);
    CHECK(r42.next_u64() == 0x28efe333b266f103ull);
  }

  TEST_CASE("hash_combine matches the frozen reference and is order dependent") {
    CHECK(hash_combine(1, 2) == 0x72fdc7f1d738255cull);
    CHECK(hash_combine(1, 2) != hash_combine(2, 1));
  }

  TEST_CASE("same seed gives the same draws") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng c(1234), d(1234);
    for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
  }

  TEST_CASE("uniform stays in [0, 1) and matches the bit recipe") {
    Rng a(0);
    CHECK(a.uniform() == doctest::Approx(0.8833108082136426).epsilon(1e-15));
    Rng b(99);
    for (int i = 0; i < 10000; ++i) {
      const double u = b.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("uniform(lo, hi) respects the interval") {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) {
      const double u = r.uniform(-3.0, 3.0);
      CHECK(u >= -3.0);
      CHECK(u < 3.0);
    }
  }

  TEST_CASE("normal has roughly standard moments") {
    Rng r(2024);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = r.normal();
      s += x;
      s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
  }

  TEST_CASE("normal(mean, stddev) shifts and scales") {
    Rng a(7), b(7);
    const double x = a.normal();
    CHECK(b.normal(10.0, 2.0) == doctest::Approx(10.0 + 2.0 * x).epsilon(1e-15));
  }

  TEST_CASE("derived streams are decorrelated and independent of consumption") {
    Rng parent(77);
    Rng d0 = parent.derive(0);
    parent.uniform();  // consuming the parent must not move the derived streams
    parent.uniform();
    Rng d0_again = parent.derive(0);
    CHECK(d0.uniform() == d0_again.uniform());

    std::set<std::uint64_t> firsts;
    for (std::uint64_t i = 0; i < 64; ++i) firsts.insert(parent.derive(i).next_u64());
    CHECK(firsts.size() == 64);  // no stream collisions
  }

  TEST_CASE("seed() reports the construction seed") {
    CHECK(Rng(123).seed() == 123);
  }
}
