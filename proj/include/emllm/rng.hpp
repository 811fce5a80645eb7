#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace emllm {

// xoshiro256** (Blackman & Vigna), seeded through splitmix64.
//
// The distributions below are implemented here rather than taken from
// <random> because the standard distributions are implementation-defined;
// model training must produce the same trajectory on every toolchain.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n), rejection-sampled (no modulo bias). n > 0.
  uint64_t below(uint64_t n);
  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  uint64_t s_[4];
};

}  // namespace emllm
