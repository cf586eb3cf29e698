#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/common.hpp"

namespace clarity {

// Mono sample sequence plus its rate; the time-domain currency of the
// pipeline. Samples are nominally in [-1, 1] but the type does not clamp.
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 0;

  AudioSignal() = default;
  AudioSignal(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {
    if (sample_rate <= 0) {
      throw std::invalid_argument("AudioSignal: sample_rate must be positive");
    }
  }

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  void check_finite(const char* context) const {
    for (double v : samples) {
      if (!std::isfinite(v)) {
        throw DataError(std::string(context) + ": non-finite sample in signal");
      }
    }
  }
};

inline double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double rms(const AudioSignal& x) { return rms(x.samples); }

}  // namespace clarity
