#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "clarity/dsp.hpp"
#include "clarity/fft.hpp"
#include "clarity/filters.hpp"
#include "clarity/infer.hpp"
#include "clarity/masks.hpp"
#include "clarity/model.hpp"

namespace clarity {

// Hop-synchronous single-pass denoiser. Feed raw (unfiltered) hop-sized
// chunks; enhanced audio comes back one hop behind the analysis frame, so
// the algorithmic latency is exactly one frame length. After warm-up every
// push performs: input band filter, one windowed FFT, feature update, mask
// inference, causal smoothing, mask arithmetic, one inverse FFT, weighted
// overlap-add, output band filter. No allocation happens after construction.
//
// The arithmetic mirrors the offline chain operation for operation, so a
// whole-signal run agrees with denoise_signal(causal_smoothing=true) to
// rounding noise.
class StreamDenoiser {
 public:
  struct StageTimings {
    double pre_ms = 0.0;        // filter, framing, FFT, features
    double inference_ms = 0.0;  // mask prediction
    double post_ms = 0.0;       // smoothing, masks, inverse FFT, OLA, filter
  };

  explicit StreamDenoiser(const ModelWeights& w)
      : config_(w.config),
        grid_(w.config.grid()),
        engine_(w),
        filt_in_(design_band_filter(kVoiceBandLowHz, kVoiceBandHighHz, kPipelineSampleRate)),
        filt_out_(design_band_filter(kVoiceBandLowHz, kVoiceBandHighHz, kPipelineSampleRate)),
        plan_(w.config.frame_length) {
    const std::size_t F = config_.frame_length;
    const std::size_t H = config_.hop;
    const std::size_t T = config_.context_frames;
    const std::size_t B = config_.n_bins;
    fchunk_.resize(H);
    in_win_.assign(F, 0.0);
    cx_.resize(F);
    bins_.resize(B);
    ebins_.resize(B);
    frame_td_.resize(F);
    feat_win_.assign(T * B, std::log(kLogFloor));
    raw_ring_.assign(T * F, 0.0);
    raw_mean_.resize(F);
    clean_raw_.resize(B);
    noise_raw_.resize(B);
    clean_s_.resize(B);
    noise_s_.resize(B);
    kernel_ = detail::causal_kernel(config_.smoothing);
    hist_clean_.assign(kernel_.size() * B, 0.0);
    hist_noise_.assign(kernel_.size() * B, 0.0);
    acc_tail_.assign(F - H, 0.0);
    env_tail_.assign(F - H, 0.0);
    tail_buf_.resize(F - H);
  }

  std::size_t frame_length() const { return config_.frame_length; }
  std::size_t hop() const { return config_.hop; }
  std::size_t frames_processed() const { return frames_done_; }

  // n must equal hop(). Returns the number of enhanced samples written to
  // out (0 during warm-up, hop() afterwards); out needs room for hop().
  std::size_t push_frame(const double* chunk, std::size_t n, double* out) {
    StageTimings ignored;
    return push_frame_timed(chunk, n, out, ignored);
  }

  std::size_t push_frame_timed(const double* chunk, std::size_t n, double* out,
                               StageTimings& timings) {
    using clock = std::chrono::steady_clock;
    if (n != config_.hop) {
      throw std::invalid_argument("push_frame: expected " + std::to_string(config_.hop) +
                                  " samples, got " + std::to_string(n));
    }
    if (flushed_) throw std::logic_error("push_frame: stream already flushed");
    const std::size_t F = config_.frame_length;
    const std::size_t H = config_.hop;
    const std::size_t T = config_.context_frames;
    const std::size_t B = config_.n_bins;

    const auto t0 = clock::now();
    filt_in_.process(chunk, fchunk_.data(), H);
    std::copy(in_win_.begin() + H, in_win_.end(), in_win_.begin());
    std::copy(fchunk_.begin(), fchunk_.end(), in_win_.end() - H);
    ++pushes_;
    if (pushes_ * H < F) {
      const auto t1 = clock::now();
      timings.pre_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      timings.inference_ms = 0.0;
      timings.post_ms = 0.0;
      return 0;
    }

    // analysis: windowed FFT, log features, raw context mean
    for (std::size_t k = 0; k < F; ++k) cx_[k] = {grid_.window[k] * in_win_[k], 0.0};
    plan_.forward(cx_.data());
    std::copy(cx_.begin(), cx_.begin() + B, bins_.begin());
    std::memmove(feat_win_.data(), feat_win_.data() + B, (T - 1) * B * sizeof(double));
    double* newest = feat_win_.data() + (T - 1) * B;
    for (std::size_t m = 0; m < B; ++m) {
      newest[m] = std::log(std::max(std::abs(bins_[m]), kLogFloor));
    }
    std::copy(in_win_.begin(), in_win_.end(), raw_ring_.begin() + raw_pos_ * F);
    raw_pos_ = (raw_pos_ + 1) % T;
    // oldest-to-newest sum matches the batch feature exactly
    std::fill(raw_mean_.begin(), raw_mean_.end(), 0.0);
    for (std::size_t i = 0; i < T; ++i) {
      const double* row = raw_ring_.data() + ((raw_pos_ + i) % T) * F;
      for (std::size_t k = 0; k < F; ++k) raw_mean_[k] += row[k];
    }
    const double inv_t = 1.0 / static_cast<double>(T);
    for (std::size_t k = 0; k < F; ++k) raw_mean_[k] *= inv_t;
    const auto t1 = clock::now();

    engine_.predict(feat_win_.data(), raw_mean_.data(), clean_raw_.data(), noise_raw_.data());
    const auto t2 = clock::now();

    // causal smoothing over the prediction history
    const std::size_t ring = kernel_.size();  // truncation_radius + 1
    const std::size_t slot = frames_done_ % ring;
    std::copy(clean_raw_.begin(), clean_raw_.end(), hist_clean_.begin() + slot * B);
    std::copy(noise_raw_.begin(), noise_raw_.end(), hist_noise_.begin() + slot * B);
    const std::size_t depth = std::min(ring - 1, frames_done_);
    double norm = 0.0;
    for (std::size_t d = 0; d <= depth; ++d) norm += kernel_[d];
    for (std::size_t m = 0; m < B; ++m) {
      double ac = 0.0, an = 0.0;
      for (std::size_t d = 0; d <= depth; ++d) {
        const std::size_t src = (slot + ring - d) % ring;
        ac += kernel_[d] * hist_clean_[src * B + m];
        an += kernel_[d] * hist_noise_[src * B + m];
      }
      clean_s_[m] = ac / norm;
      noise_s_[m] = an / norm;
    }

    // mask arithmetic and resynthesis of one frame
    const double expo = 2.0 / config_.exponent_L;
    const bool identity_expo = expo == 1.0;
    for (std::size_t m = 0; m < B; ++m) {
      const std::complex<double> x = bins_[m];
      const double a = std::abs(x);
      const double p = identity_expo ? clean_s_[m] * a : std::pow(clean_s_[m], expo) * a;
      const double q = identity_expo ? noise_s_[m] * a : std::pow(noise_s_[m], expo) * a;
      const double mag = std::max(p - q, 0.0);
      const std::complex<double> phasor = a > 0.0 ? x / a : std::complex<double>(1.0, 0.0);
      ebins_[m] = mag * phasor;
    }
    detail::inverse_frame(ebins_.data(), F, plan_, cx_.data(), frame_td_.data());

    // weighted overlap-add; the leading hop of the window span is complete
    for (std::size_t k = 0; k < H; ++k) {
      const double acc = acc_tail_[k] + frame_td_[k];
      const double env = env_tail_[k] + grid_.window[k];
      fchunk_[k] = env > 1e-6 ? acc / env : 0.0;
    }
    const std::size_t tail = F - H;
    for (std::size_t k = 0; k < tail; ++k) {
      const double acc = k + H < tail ? acc_tail_[k + H] : 0.0;
      const double env = k + H < tail ? env_tail_[k + H] : 0.0;
      acc_tail_[k] = acc + frame_td_[H + k];
      env_tail_[k] = env + grid_.window[H + k];
    }
    filt_out_.process(fchunk_.data(), out, H);
    ++frames_done_;
    const auto t3 = clock::now();

    timings.pre_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    timings.inference_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    timings.post_ms = std::chrono::duration<double, std::milli>(t3 - t2).count();
    return H;
  }

  // Drain the last partially-covered window span (frame_length - hop
  // samples). Further pushes are rejected.
  std::size_t flush(double* out) {
    if (flushed_ || frames_done_ == 0) {
      flushed_ = true;
      return 0;
    }
    flushed_ = true;
    const std::size_t tail = config_.frame_length - config_.hop;
    for (std::size_t k = 0; k < tail; ++k) {
      tail_buf_[k] = env_tail_[k] > 1e-6 ? acc_tail_[k] / env_tail_[k] : 0.0;
    }
    filt_out_.process(tail_buf_.data(), out, tail);
    return tail;
  }

 private:
  ModelConfig config_;
  FrameGrid grid_;
  InferenceEngine engine_;
  BiquadCascade filt_in_;
  BiquadCascade filt_out_;
  FftPlan plan_;

  std::vector<double> fchunk_, in_win_, frame_td_, feat_win_, raw_ring_, raw_mean_;
  std::vector<double> clean_raw_, noise_raw_, clean_s_, noise_s_;
  std::vector<double> kernel_, hist_clean_, hist_noise_;
  std::vector<double> acc_tail_, env_tail_, tail_buf_;
  std::vector<std::complex<double>> cx_, bins_, ebins_;
  std::size_t pushes_ = 0;
  std::size_t frames_done_ = 0;
  std::size_t raw_pos_ = 0;
  bool flushed_ = false;
};

// Convenience wrapper: run a whole signal through the streaming path,
// padding to a hop multiple internally and returning exactly as many
// samples as came in.
inline AudioSignal stream_denoise_signal(const AudioSignal& in, const ModelWeights& w) {
  if (in.sample_rate != kPipelineSampleRate) {
    throw std::invalid_argument("stream_denoise_signal: expected " +
                                std::to_string(kPipelineSampleRate) + " Hz input");
  }
  StreamDenoiser sd(w);
  const std::size_t H = sd.hop();
  std::vector<double> padded = in.samples;
  if (padded.size() % H != 0) padded.resize(padded.size() + (H - padded.size() % H), 0.0);

  AudioSignal out;
  out.sample_rate = in.sample_rate;
  out.samples.resize(padded.size());
  std::size_t written = 0;
  for (std::size_t pos = 0; pos < padded.size(); pos += H) {
    written += sd.push_frame(padded.data() + pos, H, out.samples.data() + written);
  }
  written += sd.flush(out.samples.data() + written);
  out.samples.resize(std::min(written, in.samples.size()));
  return out;
}

struct StageStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
};

struct LatencyReport {
  StageStats pre, inference, post, total;
  std::size_t frames = 0;
  double frame_period_ms = 0.0;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double rank = std::ceil(q * static_cast<double>(v.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return v[std::min(idx, v.size() - 1)];
}

inline StageStats stage_stats(const std::vector<double>& samples) {
  StageStats s;
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_ms = sum / static_cast<double>(samples.size());
  s.median_ms = percentile(samples, 0.50);
  s.p95_ms = percentile(samples, 0.95);
  s.p99_ms = percentile(samples, 0.99);
  return s;
}

}  // namespace detail

// Per-frame wall-clock statistics for the streaming path over one signal.
// Warm-up pushes that produce no frame are excluded.
inline LatencyReport profile_stream(const ModelWeights& w, const AudioSignal& signal) {
  if (signal.sample_rate != kPipelineSampleRate) {
    throw std::invalid_argument("profile_stream: expected " +
                                std::to_string(kPipelineSampleRate) + " Hz input");
  }
  StreamDenoiser sd(w);
  const std::size_t H = sd.hop();
  std::vector<double> padded = signal.samples;
  if (padded.size() % H != 0) padded.resize(padded.size() + (H - padded.size() % H), 0.0);
  if (padded.size() < sd.frame_length()) {
    throw DataError("profile_stream: signal shorter than one frame");
  }

  const std::size_t n_chunks = padded.size() / H;
  std::vector<double> pre, inf, post, total;
  pre.reserve(n_chunks);
  inf.reserve(n_chunks);
  post.reserve(n_chunks);
  total.reserve(n_chunks);
  std::vector<double> out(H);

  for (std::size_t pos = 0; pos < padded.size(); pos += H) {
    StreamDenoiser::StageTimings t;
    const std::size_t got = sd.push_frame_timed(padded.data() + pos, H, out.data(), t);
    if (got == 0) continue;
    pre.push_back(t.pre_ms);
    inf.push_back(t.inference_ms);
    post.push_back(t.post_ms);
    total.push_back(t.pre_ms + t.inference_ms + t.post_ms);
  }

  LatencyReport report;
  report.pre = detail::stage_stats(pre);
  report.inference = detail::stage_stats(inf);
  report.post = detail::stage_stats(post);
  report.total = detail::stage_stats(total);
  report.frames = total.size();
  report.frame_period_ms = 1000.0 * static_cast<double>(H) /
                           static_cast<double>(kPipelineSampleRate);
  return report;
}

}  // namespace clarity
