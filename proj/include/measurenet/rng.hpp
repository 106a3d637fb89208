#pragma once

#include <cstdint>

namespace measurenet {

// Deterministic splitmix64 generator. The whole artifact draws randomness
// through this type so that a seed pins every experiment exactly; nothing
// routes through std::random_device or unspecified distribution internals.
//
// Stream splitting: derive(i) finalizes (seed, i) through the splitmix64
// mixer, so derived streams are decorrelated and independent of how much of
// the parent stream has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via the Marsaglia polar method. Pairs are generated at
  // once and the spare is cached, so draws come in a fixed order.
  double normal();
  double normal(double mean, double stddev);

  Rng derive(std::uint64_t stream_index) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 finalizer, exposed for seed hashing elsewhere in the artifact.
std::uint64_t mix64(std::uint64_t x);

// Order-dependent combine of two 64-bit values through mix64.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace measurenet
