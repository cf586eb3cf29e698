#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace clarity {

// Seeded RNG wrapper. Distributions are implemented here instead of
// <random>'s because std::uniform_real_distribution and friends are
// implementation-defined; mt19937_64's raw stream is not. Same seed,
// same numbers, on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call, the pair's twin is discarded to keep
  // the stream position independent of call parity.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant at the sizes used
  // here (shuffles over at most a few thousand items).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  // Deterministic Fisher-Yates, independent of std::shuffle's
  // implementation-defined draw sequence.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace clarity
