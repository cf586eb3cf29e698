#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"
#include "clarity/dsp.hpp"
#include "clarity/fft.hpp"
#include "clarity/resample.hpp"

namespace clarity {

namespace detail {

inline std::size_t common_length(const AudioSignal& a, const AudioSignal& b,
                                 const char* who) {
  if (a.sample_rate != b.sample_rate) {
    throw std::invalid_argument(std::string(who) + ": sample rates differ");
  }
  if (a.size() != b.size()) {
    warn("%s: length mismatch (%zu vs %zu), truncating", who, a.size(), b.size());
  }
  return std::min(a.size(), b.size());
}

}  // namespace detail

// ---- segmental SNR ----

struct SegSnrResult {
  double mean_db = 0.0;
  std::vector<std::size_t> frame_index;  // frames that passed the silence gate
  std::vector<double> frame_db;          // clamped to [-10, 35]
  std::vector<double> frame_db_raw;      // pre-clamp (may be +inf on zero error)
};

inline SegSnrResult seg_snr_frames(const AudioSignal& clean, const AudioSignal& enhanced,
                                   std::size_t frame_length = 128,
                                   double silence_energy = 1e-10) {
  if (frame_length == 0) throw std::invalid_argument("seg_snr: frame_length must be > 0");
  const std::size_t n = detail::common_length(clean, enhanced, "seg_snr");
  const std::size_t n_frames = n / frame_length;

  SegSnrResult result;
  double sum = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* x = clean.samples.data() + f * frame_length;
    const double* y = enhanced.samples.data() + f * frame_length;
    double energy = 0.0, error = 0.0;
    for (std::size_t i = 0; i < frame_length; ++i) {
      energy += x[i] * x[i];
      const double d = x[i] - y[i];
      error += d * d;
    }
    if (energy <= silence_energy) continue;
    const double raw = 10.0 * std::log10(energy / error);  // +inf when error == 0
    const double clamped = std::clamp(raw, -10.0, 35.0);
    result.frame_index.push_back(f);
    result.frame_db_raw.push_back(raw);
    result.frame_db.push_back(clamped);
    sum += clamped;
  }
  if (result.frame_db.empty()) throw DataError("seg_snr: all frames silent");
  result.mean_db = sum / static_cast<double>(result.frame_db.size());
  return result;
}

inline double seg_snr(const AudioSignal& clean, const AudioSignal& enhanced,
                      std::size_t frame_length = 128) {
  return seg_snr_frames(clean, enhanced, frame_length).mean_db;
}

// ---- log-likelihood ratio ----

namespace detail {

// Levinson-Durbin on autocorrelation r[0..order]; writes the prediction-error
// filter a[0..order] (a[0] = 1). Returns false on degenerate input.
inline bool levinson(const double* r, int order, double* a) {
  if (r[0] <= 0.0) return false;
  double err = r[0];
  a[0] = 1.0;
  for (int i = 1; i <= order; ++i) a[i] = 0.0;
  for (int m = 1; m <= order; ++m) {
    double acc = r[m];
    for (int i = 1; i < m; ++i) acc += a[i] * r[m - i];
    const double k = -acc / err;
    for (int i = 1, j = m - 1; i <= j; ++i, --j) {
      const double ai = a[i] + k * a[j];
      const double aj = a[j] + k * a[i];
      a[i] = ai;
      a[j] = aj;
    }
    a[m] = k;
    err *= 1.0 - k * k;
    if (err <= 0.0) return false;
  }
  return true;
}

// a R aT for Toeplitz R built from autocorrelation r.
inline double toeplitz_quadratic_form(const double* r, const double* a, int order) {
  double q = 0.0;
  for (int i = 0; i <= order; ++i) {
    for (int j = 0; j <= order; ++j) q += a[i] * a[j] * r[std::abs(i - j)];
  }
  return q;
}

inline void windowed_autocorrelation(const double* x, std::size_t n,
                                     const std::vector<double>& window, int order,
                                     std::vector<double>& scratch, double* r) {
  for (std::size_t i = 0; i < n; ++i) scratch[i] = x[i] * window[i];
  for (int k = 0; k <= order; ++k) {
    double acc = 0.0;
    for (std::size_t i = k; i < n; ++i) acc += scratch[i] * scratch[i - k];
    r[k] = acc;
  }
}

}  // namespace detail

struct LlrOptions {
  int lpc_order = 10;
  double frame_ms = 25.0;
  double hop_ms = 10.0;
};

// Per-frame log ratio of LPC residual energies, floored at 0.
inline std::vector<double> llr_frames(const AudioSignal& clean, const AudioSignal& enhanced,
                                      const LlrOptions& opts = {}) {
  if (opts.lpc_order < 1) throw std::invalid_argument("llr: lpc_order must be >= 1");
  const std::size_t n = detail::common_length(clean, enhanced, "llr");
  const std::size_t frame =
      static_cast<std::size_t>(opts.frame_ms * 1e-3 * clean.sample_rate + 0.5);
  const std::size_t hop = static_cast<std::size_t>(opts.hop_ms * 1e-3 * clean.sample_rate + 0.5);
  if (frame <= static_cast<std::size_t>(opts.lpc_order) || hop == 0) {
    throw std::invalid_argument("llr: frame too short for LPC order");
  }
  if (n < frame) throw DataError("llr: signal shorter than one analysis frame");

  std::vector<double> window(frame);
  for (std::size_t k = 0; k < frame; ++k) {
    window[k] = 0.5 * (1.0 - std::cos(2.0 * kPi * k / frame));
  }
  const int p = opts.lpc_order;
  std::vector<double> r_clean(p + 1), r_enh(p + 1), a_clean(p + 1), a_enh(p + 1);
  std::vector<double> scratch(frame);

  std::vector<double> values;
  for (std::size_t start = 0; start + frame <= n; start += hop) {
    detail::windowed_autocorrelation(clean.samples.data() + start, frame, window, p, scratch,
                                     r_clean.data());
    detail::windowed_autocorrelation(enhanced.samples.data() + start, frame, window, p,
                                     scratch, r_enh.data());
    if (!detail::levinson(r_clean.data(), p, a_clean.data()) ||
        !detail::levinson(r_enh.data(), p, a_enh.data())) {
      continue;  // degenerate frame
    }
    const double num = detail::toeplitz_quadratic_form(r_clean.data(), a_enh.data(), p);
    const double den = detail::toeplitz_quadratic_form(r_clean.data(), a_clean.data(), p);
    if (den <= 0.0) continue;
    values.push_back(std::max(0.0, std::log(num / den)));
  }
  if (values.empty()) throw DataError("llr: no usable analysis frames");
  return values;
}

// Aggregate: mean of the smallest 95% of frame values.
inline double llr(const AudioSignal& clean, const AudioSignal& enhanced,
                  const LlrOptions& opts = {}) {
  auto values = llr_frames(clean, enhanced, opts);
  std::sort(values.begin(), values.end());
  std::size_t keep = static_cast<std::size_t>(0.95 * static_cast<double>(values.size()));
  keep = std::max<std::size_t>(keep, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += values[i];
  return sum / static_cast<double>(keep);
}

// ---- short-time objective intelligibility ----

namespace detail {

struct StoiLayout {
  static constexpr int kRate = 10000;
  static constexpr std::size_t kFrame = 256;
  static constexpr std::size_t kHop = 128;
  static constexpr std::size_t kFft = 512;
  static constexpr std::size_t kBands = 15;
  static constexpr std::size_t kSegment = 30;       // 384 ms
  static constexpr double kDynamicRangeDb = 40.0;   // silent-frame gate
  static constexpr double kClipDb = -15.0;          // SDR clip bound
};

// Drop frames whose clean-frame energy sits >40 dB below the loudest frame,
// keeping both signals aligned; survivors are overlap-added back together.
inline void stoi_remove_silent(std::vector<double>& x, std::vector<double>& y) {
  using L = StoiLayout;
  std::vector<double> window(L::kFrame);
  for (std::size_t k = 0; k < L::kFrame; ++k) {
    window[k] = 0.5 * (1.0 - std::cos(2.0 * kPi * k / L::kFrame));
  }
  const std::size_t n = std::min(x.size(), y.size());
  if (n < L::kFrame) {
    x.clear();
    y.clear();
    return;
  }
  const std::size_t n_frames = (n - L::kFrame) / L::kHop + 1;
  std::vector<double> energy_db(n_frames);
  double max_db = -1e30;
  for (std::size_t f = 0; f < n_frames; ++f) {
    double e = 0.0;
    const double* px = x.data() + f * L::kHop;
    for (std::size_t k = 0; k < L::kFrame; ++k) {
      const double v = window[k] * px[k];
      e += v * v;
    }
    energy_db[f] = e > 0.0 ? 10.0 * std::log10(e) : -1e30;
    max_db = std::max(max_db, energy_db[f]);
  }

  std::vector<double> out_x, out_y;
  out_x.reserve(n);
  out_y.reserve(n);
  std::size_t kept = 0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (energy_db[f] <= max_db - L::kDynamicRangeDb) continue;
    const std::size_t dst = kept * L::kHop;
    out_x.resize(dst + L::kFrame, 0.0);
    out_y.resize(dst + L::kFrame, 0.0);
    const double* px = x.data() + f * L::kHop;
    const double* py = y.data() + f * L::kHop;
    for (std::size_t k = 0; k < L::kFrame; ++k) {
      out_x[dst + k] += window[k] * px[k];
      out_y[dst + k] += window[k] * py[k];
    }
    ++kept;
  }
  x = std::move(out_x);
  y = std::move(out_y);
}

// One-third-octave band magnitudes per frame: rows frames, cols 15 bands.
inline RealMat stoi_band_amplitudes(const std::vector<double>& x) {
  using L = StoiLayout;
  std::vector<double> window(L::kFrame);
  for (std::size_t k = 0; k < L::kFrame; ++k) {
    window[k] = 0.5 * (1.0 - std::cos(2.0 * kPi * k / L::kFrame));
  }
  const std::size_t n_frames = x.size() < L::kFrame ? 0 : (x.size() - L::kFrame) / L::kHop + 1;

  // band -> FFT bin range at 10 kHz / 512 points
  std::array<std::pair<std::size_t, std::size_t>, L::kBands> edges;
  for (std::size_t b = 0; b < L::kBands; ++b) {
    const double cf = 150.0 * std::pow(2.0, static_cast<double>(b) / 3.0);
    const double f_lo = cf * std::pow(2.0, -1.0 / 6.0);
    const double f_hi = cf * std::pow(2.0, 1.0 / 6.0);
    const double hz_per_bin = static_cast<double>(L::kRate) / L::kFft;
    edges[b].first = static_cast<std::size_t>(std::ceil(f_lo / hz_per_bin));
    edges[b].second = std::min<std::size_t>(
        static_cast<std::size_t>(std::ceil(f_hi / hz_per_bin)), L::kFft / 2 + 1);
  }

  FftPlan plan(L::kFft);
  std::vector<std::complex<double>> buf(L::kFft);
  RealMat bands(n_frames, L::kBands);
  for (std::size_t f = 0; f < n_frames; ++f) {
    for (std::size_t k = 0; k < L::kFrame; ++k) {
      buf[k] = window[k] * x[f * L::kHop + k];
    }
    std::fill(buf.begin() + L::kFrame, buf.end(), std::complex<double>(0.0, 0.0));
    plan.forward(buf.data());
    for (std::size_t b = 0; b < L::kBands; ++b) {
      double acc = 0.0;
      for (std::size_t j = edges[b].first; j < edges[b].second; ++j) acc += std::norm(buf[j]);
      bands(f, b) = std::sqrt(acc);
    }
  }
  return bands;
}

}  // namespace detail

inline double stoi(const AudioSignal& clean, const AudioSignal& enhanced) {
  using L = detail::StoiLayout;
  const std::size_t n = detail::common_length(clean, enhanced, "stoi");

  AudioSignal x(std::vector<double>(clean.samples.begin(), clean.samples.begin() + n),
                clean.sample_rate);
  AudioSignal y(std::vector<double>(enhanced.samples.begin(), enhanced.samples.begin() + n),
                enhanced.sample_rate);
  x = resample(x, L::kRate);
  y = resample(y, L::kRate);

  detail::stoi_remove_silent(x.samples, y.samples);
  RealMat bx = detail::stoi_band_amplitudes(x.samples);
  RealMat by = detail::stoi_band_amplitudes(y.samples);
  if (bx.rows() < L::kSegment) {
    throw DataError("stoi: fewer than 384 ms of audible signal");
  }

  const double clip_factor = 1.0 + std::pow(10.0, -L::kClipDb / 20.0);
  double sum = 0.0;
  std::size_t cells = 0;
  std::vector<double> seg_x(L::kSegment), seg_y(L::kSegment);
  for (std::size_t m = L::kSegment - 1; m < bx.rows(); ++m) {
    for (std::size_t b = 0; b < L::kBands; ++b) {
      double norm_x = 0.0, norm_y = 0.0;
      for (std::size_t i = 0; i < L::kSegment; ++i) {
        seg_x[i] = bx(m + 1 - L::kSegment + i, b);
        seg_y[i] = by(m + 1 - L::kSegment + i, b);
        norm_x += seg_x[i] * seg_x[i];
        norm_y += seg_y[i] * seg_y[i];
      }
      const double alpha = norm_y > 0.0 ? std::sqrt(norm_x / norm_y) : 0.0;
      double mean_x = 0.0, mean_y = 0.0;
      for (std::size_t i = 0; i < L::kSegment; ++i) {
        seg_y[i] = std::min(alpha * seg_y[i], clip_factor * seg_x[i]);
        mean_x += seg_x[i];
        mean_y += seg_y[i];
      }
      mean_x /= L::kSegment;
      mean_y /= L::kSegment;
      double cov = 0.0, var_x = 0.0, var_y = 0.0;
      for (std::size_t i = 0; i < L::kSegment; ++i) {
        const double dx = seg_x[i] - mean_x;
        const double dy = seg_y[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
      }
      if (var_x <= 0.0 || var_y <= 0.0) continue;  // flat band segment
      sum += cov / std::sqrt(var_x * var_y);
      ++cells;
    }
  }
  if (cells == 0) throw DataError("stoi: no usable band segments");
  return sum / static_cast<double>(cells);
}

// ---- scale-invariant SDR ----

inline double si_sdr(const AudioSignal& clean, const AudioSignal& enhanced) {
  const std::size_t n = detail::common_length(clean, enhanced, "si_sdr");
  if (n == 0) throw DataError("si_sdr: empty input");
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += clean.samples[i];
    mean_y += enhanced.samples[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double dot = 0.0, energy_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = clean.samples[i] - mean_x;
    const double y = enhanced.samples[i] - mean_y;
    dot += x * y;
    energy_x += x * x;
  }
  if (energy_x <= 0.0) throw DataError("si_sdr: zero clean signal");

  const double scale = dot / energy_x;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = clean.samples[i] - mean_x;
    const double y = enhanced.samples[i] - mean_y;
    const double t = scale * x;
    target += t * t;
    residual += (y - t) * (y - t);
  }
  if (target <= 0.0) return -100.0;
  if (residual <= 0.0) return 100.0;
  return std::clamp(10.0 * std::log10(target / residual), -100.0, 100.0);
}

// ---- bundled report ----

struct MetricReport {
  double seg_snr_db = 0.0;
  double llr = 0.0;
  double stoi = 0.0;
  double si_sdr_db = 0.0;
};

inline MetricReport evaluate_pair(const AudioSignal& clean, const AudioSignal& enhanced) {
  MetricReport report;
  report.seg_snr_db = seg_snr(clean, enhanced);
  report.llr = llr(clean, enhanced);
  report.stoi = stoi(clean, enhanced);
  report.si_sdr_db = si_sdr(clean, enhanced);
  return report;
}

}  // namespace clarity
