#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"
#include "clarity/fft.hpp"

namespace clarity {

// Analysis framing: window applied per frame, hop between frame starts.
struct FrameGrid {
  std::size_t frame_length = 0;
  std::size_t hop = 0;
  std::vector<double> window;

  static FrameGrid hann(std::size_t frame_length, std::size_t hop) {
    if (frame_length == 0 || hop == 0 || hop > frame_length) {
      throw std::invalid_argument("FrameGrid: need 0 < hop <= frame_length");
    }
    FrameGrid g;
    g.frame_length = frame_length;
    g.hop = hop;
    g.window.resize(frame_length);
    const double two_pi = 6.283185307179586476925286766559;
    // Periodic Hann: exact unit overlap-add at 50% hop.
    for (std::size_t k = 0; k < frame_length; ++k) {
      g.window[k] = 0.5 * (1.0 - std::cos(two_pi * k / frame_length));
    }
    return g;
  }

  static FrameGrid rectangular(std::size_t frame_length, std::size_t hop) {
    if (frame_length == 0 || hop == 0 || hop > frame_length) {
      throw std::invalid_argument("FrameGrid: need 0 < hop <= frame_length");
    }
    FrameGrid g;
    g.frame_length = frame_length;
    g.hop = hop;
    g.window.assign(frame_length, 1.0);
    return g;
  }

  std::size_t n_bins() const { return frame_length / 2 + 1; }

  // Steady-state overlapped window sum, sampled over one hop period.
  // Constant for COLA-satisfying grids.
  std::vector<double> overlap_window_sum() const {
    std::vector<double> sum(hop, 0.0);
    for (std::size_t start = 0; start < frame_length; start += hop) {
      for (std::size_t k = 0; k < hop && start + k < frame_length; ++k) {
        sum[k] += window[start + k];
      }
    }
    return sum;
  }

  bool satisfies_cola(double tol = 1e-8) const {
    auto sum = overlap_window_sum();
    double lo = sum[0], hi = sum[0];
    for (double v : sum) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo <= tol && lo > tol;
  }
};

inline FrameGrid default_grid() { return FrameGrid::hann(128, 64); }

constexpr int kPipelineSampleRate = 8000;
constexpr double kLogFloor = 1e-8;
constexpr std::size_t kDefaultFrameLengthSamples = 128;
constexpr std::size_t kDefaultHopSamples = 64;

// Complex time-frequency matrix: rows are frames, columns one-sided bins.
struct Spectrogram {
  CplxMat bins;  // n_frames x (frame_length/2 + 1)
  FrameGrid frame_grid;
  int sample_rate = 0;

  std::size_t n_frames() const { return bins.rows(); }
  std::size_t n_bins() const { return bins.cols(); }

  RealMat magnitude() const {
    RealMat mag(bins.rows(), bins.cols());
    for (std::size_t i = 0; i < bins.size(); ++i) {
      mag.data()[i] = std::abs(bins.data()[i]);
    }
    return mag;
  }

  RealMat phase() const {
    RealMat ph(bins.rows(), bins.cols());
    for (std::size_t i = 0; i < bins.size(); ++i) {
      ph.data()[i] = std::arg(bins.data()[i]);
    }
    return ph;
  }
};

inline std::size_t frame_count(std::size_t n_samples, const FrameGrid& grid) {
  if (n_samples < grid.frame_length) return 0;
  return (n_samples - grid.frame_length + grid.hop - 1) / grid.hop + 1;
}

// Row i holds window .* samples[i*hop : i*hop + frame_length], the trailing
// partial frame zero-padded.
inline RealMat frame_signal(const AudioSignal& signal, const FrameGrid& grid) {
  const std::size_t n = signal.samples.size();
  if (n < grid.frame_length) {
    throw DataError("frame_signal: signal shorter than one frame (" +
                    std::to_string(n) + " < " + std::to_string(grid.frame_length) + ")");
  }
  const std::size_t frames = frame_count(n, grid);
  RealMat out(frames, grid.frame_length);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t start = i * grid.hop;
    const std::size_t avail = std::min(grid.frame_length, n - start);
    double* row = out.row_ptr(i);
    for (std::size_t k = 0; k < avail; ++k) {
      row[k] = grid.window[k] * signal.samples[start + k];
    }
    // remaining entries stay zero
  }
  return out;
}

// One-sided STFT; requires a power-of-two frame for the radix-2 transform.
inline Spectrogram stft(const AudioSignal& signal, const FrameGrid& grid) {
  if (!is_power_of_two(grid.frame_length)) {
    throw std::invalid_argument("stft: frame_length must be a power of two, got " +
                                std::to_string(grid.frame_length));
  }
  RealMat frames = frame_signal(signal, grid);
  const std::size_t n = grid.frame_length;
  const std::size_t bins = grid.n_bins();
  FftPlan plan(n);
  std::vector<std::complex<double>> buf(n);

  Spectrogram spec;
  spec.frame_grid = grid;
  spec.sample_rate = signal.sample_rate;
  spec.bins = CplxMat(frames.rows(), bins);
  for (std::size_t i = 0; i < frames.rows(); ++i) {
    const double* row = frames.row_ptr(i);
    for (std::size_t k = 0; k < n; ++k) buf[k] = {row[k], 0.0};
    plan.forward(buf.data());
    for (std::size_t m = 0; m < bins; ++m) spec.bins(i, m) = buf[m];
  }
  return spec;
}

namespace detail {

// Rebuild the full conjugate-symmetric spectrum and inverse-transform one
// frame. Buffers are supplied by the caller so the streaming path can reuse
// its own.
inline void inverse_frame(const std::complex<double>* one_sided, std::size_t n,
                          const FftPlan& plan, std::complex<double>* work,
                          double* frame_out) {
  const std::size_t bins = n / 2 + 1;
  for (std::size_t m = 0; m < bins; ++m) work[m] = one_sided[m];
  for (std::size_t m = bins; m < n; ++m) work[m] = std::conj(one_sided[n - m]);
  plan.inverse(work);
  for (std::size_t k = 0; k < n; ++k) frame_out[k] = work[k].real();
}

}  // namespace detail

// Weighted overlap-add resynthesis: frames were analysis-windowed, the sum
// is divided by the overlapped window envelope where it exceeds 1e-6 and
// zeroed elsewhere.
inline AudioSignal istft(const Spectrogram& spec) {
  const FrameGrid& grid = spec.frame_grid;
  if (!grid.satisfies_cola()) {
    throw std::invalid_argument("istft: frame grid does not satisfy the overlap-add constraint");
  }
  const std::size_t n = grid.frame_length;
  const std::size_t frames = spec.n_frames();
  const std::size_t out_len = frames == 0 ? 0 : (frames - 1) * grid.hop + n;

  FftPlan plan(n);
  std::vector<std::complex<double>> work(n);
  std::vector<double> frame(n);
  std::vector<double> acc(out_len, 0.0);
  std::vector<double> env(out_len, 0.0);

  for (std::size_t i = 0; i < frames; ++i) {
    detail::inverse_frame(spec.bins.row_ptr(i), n, plan, work.data(), frame.data());
    const std::size_t start = i * grid.hop;
    for (std::size_t k = 0; k < n; ++k) {
      acc[start + k] += frame[k];
      env[start + k] += grid.window[k];
    }
  }

  AudioSignal out;
  out.sample_rate = spec.sample_rate;
  out.samples.resize(out_len);
  for (std::size_t t = 0; t < out_len; ++t) {
    out.samples[t] = env[t] > 1e-6 ? acc[t] / env[t] : 0.0;
  }
  return out;
}

// Elementwise log(max(|X|, floor)).
inline RealMat log_power_features(const Spectrogram& spec, double floor = kLogFloor) {
  if (floor <= 0.0) {
    throw std::invalid_argument("log_power_features: floor must be positive");
  }
  RealMat out(spec.n_frames(), spec.n_bins());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = std::log(std::max(std::abs(spec.bins.data()[i]), floor));
  }
  return out;
}

inline std::vector<double> log_power_frame(const std::complex<double>* bins,
                                           std::size_t n_bins, double floor = kLogFloor) {
  std::vector<double> out(n_bins);
  for (std::size_t m = 0; m < n_bins; ++m) {
    out[m] = std::log(std::max(std::abs(bins[m]), floor));
  }
  return out;
}

// Time-domain summary feature: consecutive non-overlapping frames stacked
// and averaged elementwise.
struct RawSegmentFeature {
  std::vector<double> values;
  std::size_t n_frames_averaged = 0;
};

inline RawSegmentFeature raw_segment_feature(const AudioSignal& signal,
                                             std::size_t frame_length,
                                             std::size_t n_frames) {
  if (n_frames == 0) {
    throw std::invalid_argument("raw_segment_feature: n_frames must be >= 1");
  }
  if (signal.samples.size() < frame_length * n_frames) {
    throw DataError("raw_segment_feature: need " + std::to_string(frame_length * n_frames) +
                    " samples, have " + std::to_string(signal.samples.size()));
  }
  RawSegmentFeature feat;
  feat.n_frames_averaged = n_frames;
  feat.values.assign(frame_length, 0.0);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double* block = signal.samples.data() + i * frame_length;
    for (std::size_t j = 0; j < frame_length; ++j) feat.values[j] += block[j];
  }
  const double inv = 1.0 / static_cast<double>(n_frames);
  for (double& v : feat.values) v *= inv;
  return feat;
}

// Raw feature over a causal analysis-context window: elementwise mean of the
// hop-strided frames ending at `newest_frame`, with the same trailing
// zero-padding as frame_signal. fill_context_raw_mean writes into
// caller-owned storage and never allocates.
inline void fill_context_raw_mean(const std::vector<double>& samples,
                                  std::size_t newest_frame, const FrameGrid& grid,
                                  std::size_t context_frames, double* out) {
  if (context_frames == 0) {
    throw std::invalid_argument("context_raw_mean: context_frames must be >= 1");
  }
  if (newest_frame + 1 < context_frames) {
    throw DataError("context_raw_mean: frame " + std::to_string(newest_frame) +
                    " has fewer than " + std::to_string(context_frames) +
                    " causal frames");
  }
  const std::size_t n = grid.frame_length;
  for (std::size_t k = 0; k < n; ++k) out[k] = 0.0;
  for (std::size_t f = newest_frame + 1 - context_frames; f <= newest_frame; ++f) {
    const std::size_t start = f * grid.hop;
    const std::size_t avail = start < samples.size() ? samples.size() - start : 0;
    const std::size_t m = std::min(n, avail);
    const double* src = samples.data() + start;
    for (std::size_t k = 0; k < m; ++k) out[k] += src[k];
  }
  const double inv = 1.0 / static_cast<double>(context_frames);
  for (std::size_t k = 0; k < n; ++k) out[k] *= inv;
}

inline std::vector<double> context_raw_mean(const std::vector<double>& samples,
                                            std::size_t newest_frame,
                                            const FrameGrid& grid,
                                            std::size_t context_frames) {
  std::vector<double> out(grid.frame_length);
  fill_context_raw_mean(samples, newest_frame, grid, context_frames, out.data());
  return out;
}

}  // namespace clarity
