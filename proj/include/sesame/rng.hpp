#pragma once

#include <cstdint>
#include <random>

#include "sesame/tensor.hpp"

namespace sesame {

// Seeded random source with hand-rolled distributions. std::mt19937_64 is
// fully specified by the standard, but the std distributions are not, so
// every draw here goes through explicit conversions; a fixed seed yields the
// same bit stream on every platform and every run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n), n >= 1.
  std::size_t uniform_int(std::size_t n);

  // Standard normal via Box-Muller (consumes two uniforms per draw).
  double normal();
  // Zero-mean normal resampled until |x| <= 2*stddev.
  double truncated_normal(double stddev);

  Tensor normal_tensor(std::vector<std::size_t> shape, double stddev);
  Tensor truncated_normal_tensor(std::vector<std::size_t> shape, double stddev);
  Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);

  // Independent deterministic stream for sub-tasks (sweep cells, splits).
  // Derived from the construction seed only, so fork order does not matter.
  Rng fork(std::uint64_t stream) const;

  // Fisher-Yates with draws from this stream.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sesame
