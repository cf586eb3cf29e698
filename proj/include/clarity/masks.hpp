#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "clarity/common.hpp"
#include "clarity/dsp.hpp"
#include "clarity/filters.hpp"

namespace clarity {

// Clean mask and noise mask over the same time-frequency grid, entries in [0, 1].
struct MaskPair {
  RealMat clean_mask;
  RealMat noise_mask;
};

struct SmoothingSpec {
  double sigma = 1.0;          // frames
  int truncation_radius = 4;   // frames

  void validate() const {
    if (sigma <= 0.0) throw std::invalid_argument("SmoothingSpec: sigma must be positive");
    if (truncation_radius < 1) {
      throw std::invalid_argument("SmoothingSpec: truncation_radius must be >= 1");
    }
  }
};

struct ReconstructionSpec {
  double exponent_L = 2.0;
  double floor = kLogFloor;

  void validate() const {
    if (exponent_L <= 0.0) {
      throw std::invalid_argument("ReconstructionSpec: exponent_L must be positive");
    }
    if (floor < 0.0) throw std::invalid_argument("ReconstructionSpec: floor must be >= 0");
  }
};

// Energy-ratio training targets. clean = sqrt(S^2 / (S^2 + X^2)),
// noise = sqrt(N^2 / (N^2 + X^2)) per bin, squared magnitudes as energies.
// Bins whose denominator falls below floor^2 yield 0.
inline MaskPair ideal_masks(const Spectrogram& clean, const Spectrogram& noise,
                            const Spectrogram& mix, double floor = kLogFloor) {
  if (!clean.bins.same_shape(noise.bins) || !clean.bins.same_shape(mix.bins)) {
    throw std::invalid_argument("ideal_masks: spectrogram shapes differ");
  }
  const double floor_sq = floor * floor;
  MaskPair out;
  out.clean_mask = RealMat(mix.n_frames(), mix.n_bins());
  out.noise_mask = RealMat(mix.n_frames(), mix.n_bins());
  for (std::size_t i = 0; i < mix.bins.size(); ++i) {
    const double s2 = std::norm(clean.bins.data()[i]);
    const double n2 = std::norm(noise.bins.data()[i]);
    const double x2 = std::norm(mix.bins.data()[i]);
    const double clean_den = s2 + x2;
    const double noise_den = n2 + x2;
    out.clean_mask.data()[i] = clean_den < floor_sq ? 0.0 : std::sqrt(s2 / clean_den);
    out.noise_mask.data()[i] = noise_den < floor_sq ? 0.0 : std::sqrt(n2 / noise_den);
  }
  return out;
}

namespace detail {

inline std::vector<double> gaussian_kernel(const SmoothingSpec& spec) {
  spec.validate();
  const int radius = spec.truncation_radius;
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-0.5 * (i / spec.sigma) * (i / spec.sigma));
    kernel[i + radius] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;
  return kernel;
}

// Trailing half of the Gaussian (lags 0..radius, newest first), unit sum.
inline std::vector<double> causal_kernel(const SmoothingSpec& spec) {
  spec.validate();
  const int radius = spec.truncation_radius;
  std::vector<double> kernel(radius + 1);
  double sum = 0.0;
  for (int i = 0; i <= radius; ++i) {
    double w = std::exp(-0.5 * (i / spec.sigma) * (i / spec.sigma));
    kernel[i] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;
  return kernel;
}

}  // namespace detail

// Gaussian smoothing along the time axis per frequency bin, reflected edges.
inline RealMat smooth_mask(const RealMat& mask, const SmoothingSpec& spec) {
  auto kernel = detail::gaussian_kernel(spec);
  const int radius = spec.truncation_radius;
  const int frames = static_cast<int>(mask.rows());
  RealMat out(mask.rows(), mask.cols());
  for (int t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < mask.cols(); ++m) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        int src = t + d;
        // reflect: -1 -> 0, frames -> frames-1 (mirror about the edge sample)
        if (src < 0) src = -src - 1;
        if (src >= frames) src = 2 * frames - 1 - src;
        src = std::clamp(src, 0, frames - 1);
        acc += kernel[d + radius] * mask(static_cast<std::size_t>(src), m);
      }
      out(static_cast<std::size_t>(t), m) = acc;
    }
  }
  return out;
}

// Causal variant: trailing half-kernel over frames <= t, renormalized over
// the frames actually available near the start. Matches the streaming path.
inline RealMat smooth_mask_causal(const RealMat& mask, const SmoothingSpec& spec) {
  auto kernel = detail::causal_kernel(spec);
  const int radius = spec.truncation_radius;
  const int frames = static_cast<int>(mask.rows());
  RealMat out(mask.rows(), mask.cols());
  for (int t = 0; t < frames; ++t) {
    const int depth = std::min(radius, t);
    double norm = 0.0;
    for (int d = 0; d <= depth; ++d) norm += kernel[d];
    for (std::size_t m = 0; m < mask.cols(); ++m) {
      double acc = 0.0;
      for (int d = 0; d <= depth; ++d) {
        acc += kernel[d] * mask(static_cast<std::size_t>(t - d), m);
      }
      out(static_cast<std::size_t>(t), m) = acc / norm;
    }
  }
  return out;
}

// Magnitude arithmetic: P = clean^{2/L} .* A, N = noise^{2/L} .* A,
// S = max(P - N, 0).
inline RealMat apply_masks(const Spectrogram& mix, const MaskPair& masks,
                           const ReconstructionSpec& rec) {
  rec.validate();
  if (!masks.clean_mask.same_shape(masks.noise_mask) ||
      masks.clean_mask.rows() != mix.n_frames() ||
      masks.clean_mask.cols() != mix.n_bins()) {
    throw std::invalid_argument("apply_masks: mask/spectrogram shape mismatch");
  }
  const double expo = 2.0 / rec.exponent_L;
  const bool identity_expo = expo == 1.0;
  RealMat out(mix.n_frames(), mix.n_bins());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = std::abs(mix.bins.data()[i]);
    const double cm = masks.clean_mask.data()[i];
    const double nm = masks.noise_mask.data()[i];
    const double p = identity_expo ? cm * a : std::pow(cm, expo) * a;
    const double n = identity_expo ? nm * a : std::pow(nm, expo) * a;
    out.data()[i] = std::max(p - n, 0.0);
  }
  return out;
}

// Enhanced magnitude + noisy phase -> complex spectrum -> inverse transform,
// then the output band filter.
inline AudioSignal reconstruct(const RealMat& enhanced_magnitude, const Spectrogram& mix,
                               double band_low_hz = kVoiceBandLowHz,
                               double band_high_hz = kVoiceBandHighHz) {
  if (enhanced_magnitude.rows() != mix.n_frames() ||
      enhanced_magnitude.cols() != mix.n_bins()) {
    throw std::invalid_argument("reconstruct: magnitude/spectrogram shape mismatch");
  }
  Spectrogram enhanced;
  enhanced.frame_grid = mix.frame_grid;
  enhanced.sample_rate = mix.sample_rate;
  enhanced.bins = CplxMat(mix.n_frames(), mix.n_bins());
  for (std::size_t i = 0; i < mix.bins.size(); ++i) {
    const std::complex<double>& x = mix.bins.data()[i];
    const double a = std::abs(x);
    // unit phasor from the mixture bin; zero bins keep zero phase
    std::complex<double> phasor = a > 0.0 ? x / a : std::complex<double>(1.0, 0.0);
    enhanced.bins.data()[i] = enhanced_magnitude.data()[i] * phasor;
  }
  AudioSignal time = istft(enhanced);
  return bandpass_filter(time, band_low_hz, band_high_hz);
}

}  // namespace clarity
