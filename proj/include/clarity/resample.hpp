#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"

namespace clarity {

namespace detail {

// Zeroth-order modified Bessel function of the first kind (power series).
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = 0.25 * x * x;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-21) break;
  }
  return sum;
}

// Kaiser-windowed sinc prototype for polyphase resampling: `phases` branches
// of `taps_per_phase` coefficients, cutoff at 1/max(up, down) of the
// interpolated Nyquist, gain `up` to undo zero insertion.
inline std::vector<double> sinc_prototype(std::size_t up, std::size_t down,
                                          std::size_t taps_per_phase, double beta) {
  const std::size_t n = taps_per_phase * up;
  const double cutoff = 1.0 / static_cast<double>(std::max(up, down));
  const double center = 0.5 * static_cast<double>(n - 1);
  const double inv_i0 = 1.0 / bessel_i0(beta);
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - center;
    const double x = kPi * cutoff * t;
    const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
    const double w = 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
    const double kaiser = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - w * w))) * inv_i0;
    h[i] = static_cast<double>(up) * cutoff * sinc * kaiser;
  }
  return h;
}

}  // namespace detail

// Rational-ratio polyphase resampler (Kaiser beta 8.6, 64 taps per phase).
inline AudioSignal resample(const AudioSignal& signal, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target_rate must be > 0");
  if (target_rate == signal.sample_rate) return signal;
  signal.check_finite("resample");

  const std::size_t g = std::gcd(static_cast<std::size_t>(signal.sample_rate),
                                 static_cast<std::size_t>(target_rate));
  const std::size_t up = static_cast<std::size_t>(target_rate) / g;
  const std::size_t down = static_cast<std::size_t>(signal.sample_rate) / g;

  const std::size_t taps_per_phase = 64;
  const auto h = detail::sinc_prototype(up, down, taps_per_phase, 8.6);
  const std::size_t n_h = h.size();
  const std::ptrdiff_t delay = static_cast<std::ptrdiff_t>((n_h - 1) / 2);

  const std::size_t n_in = signal.size();
  const std::size_t n_out =
      (n_in * up + down - 1) / down;  // ceil(n_in * up / down)
  AudioSignal out(std::vector<double>(n_out, 0.0), target_rate);

  // Output t taps the interpolated stream at t*down; each input i contributes
  // through h at offset t*down - i*up + delay.
  for (std::size_t t = 0; t < n_out; ++t) {
    const std::ptrdiff_t anchor = static_cast<std::ptrdiff_t>(t * down) + delay;
    // valid input indices: 0 <= anchor - i*up < n_h
    std::ptrdiff_t i_lo = (anchor - static_cast<std::ptrdiff_t>(n_h - 1) +
                           static_cast<std::ptrdiff_t>(up) - 1) /
                          static_cast<std::ptrdiff_t>(up);
    std::ptrdiff_t i_hi = anchor / static_cast<std::ptrdiff_t>(up);
    i_lo = std::max<std::ptrdiff_t>(i_lo, 0);
    i_hi = std::min<std::ptrdiff_t>(i_hi, static_cast<std::ptrdiff_t>(n_in) - 1);
    double acc = 0.0;
    for (std::ptrdiff_t i = i_lo; i <= i_hi; ++i) {
      acc += signal.samples[static_cast<std::size_t>(i)] *
             h[static_cast<std::size_t>(anchor - i * static_cast<std::ptrdiff_t>(up))];
    }
    out.samples[t] = acc;
  }
  return out;
}

}  // namespace clarity
