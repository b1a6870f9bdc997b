#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace eai {

std::uint64_t splitmix64(std::uint64_t x);

// Stable per-item seed: hash(seed, index). Lets independent items be
// generated in any order (or in parallel) with identical results.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// mt19937_64 core with hand-rolled distribution transforms, so streams are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller; second deviate is cached.
  double gaussian();

  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace eai
