#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "clarity/data.hpp"
#include "clarity/dsp.hpp"
#include "clarity/filters.hpp"
#include "clarity/infer.hpp"
#include "clarity/masks.hpp"
#include "clarity/model.hpp"

namespace clarity {

struct DenoiseOptions {
  // Trailing half-kernel smoothing instead of the symmetric kernel; chosen
  // when the output must match the streaming path sample for sample.
  bool causal_smoothing = false;
};

namespace detail {

// Causal raw-context mean with virtual zero frames before t = 0, so every
// frame of a signal gets a feature. Agrees with fill_context_raw_mean from
// frame context_frames-1 onward.
inline void padded_raw_mean(const std::vector<double>& samples, std::size_t t,
                            const FrameGrid& grid, std::size_t context, double* out) {
  const std::size_t n = grid.frame_length;
  for (std::size_t k = 0; k < n; ++k) out[k] = 0.0;
  const std::size_t first = t + 1 >= context ? t + 1 - context : 0;
  for (std::size_t f = first; f <= t; ++f) {
    const std::size_t start = f * grid.hop;
    const std::size_t avail = start < samples.size() ? samples.size() - start : 0;
    const std::size_t m = std::min(n, avail);
    const double* src = samples.data() + start;
    for (std::size_t k = 0; k < m; ++k) out[k] += src[k];
  }
  const double inv = 1.0 / static_cast<double>(context);
  for (std::size_t k = 0; k < n; ++k) out[k] *= inv;
}

}  // namespace detail

// Model masks for every frame of a band-filtered mixture. Feature windows
// before the first full context are padded with the log floor (silence) and
// virtual zero samples, matching the streaming warm-up.
inline MaskPair predict_mask_frames(const ModelWeights& w, const Spectrogram& mix,
                                    const std::vector<double>& filtered_samples) {
  const ModelConfig& c = w.config;
  if (mix.n_bins() != c.n_bins) {
    throw std::invalid_argument("predict_mask_frames: spectrogram bin count mismatch");
  }
  InferenceEngine engine(w);
  const RealMat feats = log_power_features(mix);
  const double pad = std::log(kLogFloor);
  const std::size_t T = c.context_frames;
  const std::size_t B = c.n_bins;

  MaskPair out;
  out.clean_mask = RealMat(mix.n_frames(), B);
  out.noise_mask = RealMat(mix.n_frames(), B);
  std::vector<double> window(T * B);
  std::vector<double> raw(c.frame_length);
  for (std::size_t t = 0; t < mix.n_frames(); ++t) {
    for (std::size_t i = 0; i < T; ++i) {
      double* dst = window.data() + i * B;
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + 1 + i) -
                                 static_cast<std::ptrdiff_t>(T);
      if (src < 0) {
        std::fill(dst, dst + B, pad);
      } else {
        const double* row = feats.row_ptr(static_cast<std::size_t>(src));
        std::copy(row, row + B, dst);
      }
    }
    detail::padded_raw_mean(filtered_samples, t, mix.frame_grid, T, raw.data());
    engine.predict(window.data(), raw.data(), out.clean_mask.row_ptr(t),
                   out.noise_mask.row_ptr(t));
  }
  return out;
}

// Shared back half of the chain: smoothing, mask arithmetic, resynthesis,
// output band filter.
inline AudioSignal synthesize_from_masks(const Spectrogram& mix, const MaskPair& masks,
                                         const ModelConfig& config, bool causal_smoothing) {
  MaskPair smoothed;
  if (causal_smoothing) {
    smoothed.clean_mask = smooth_mask_causal(masks.clean_mask, config.smoothing);
    smoothed.noise_mask = smooth_mask_causal(masks.noise_mask, config.smoothing);
  } else {
    smoothed.clean_mask = smooth_mask(masks.clean_mask, config.smoothing);
    smoothed.noise_mask = smooth_mask(masks.noise_mask, config.smoothing);
  }
  ReconstructionSpec rec;
  rec.exponent_L = config.exponent_L;
  return reconstruct(apply_masks(mix, smoothed, rec), mix);
}

// Full offline chain: input band filter, analysis, per-frame mask
// prediction, smoothing, mask arithmetic, resynthesis, output band filter.
inline AudioSignal denoise_signal(const AudioSignal& in, const ModelWeights& w,
                                  const DenoiseOptions& opts = {}) {
  if (in.sample_rate != kPipelineSampleRate) {
    throw std::invalid_argument("denoise_signal: expected " +
                                std::to_string(kPipelineSampleRate) + " Hz input, got " +
                                std::to_string(in.sample_rate));
  }
  // Pad to a hop multiple before filtering so the band filter sees the same
  // signal the streaming path does (IIR ring-out into the padding included).
  const FrameGrid grid = w.config.grid();
  AudioSignal padded = in;
  if (padded.samples.size() % grid.hop != 0) {
    padded.samples.resize(
        padded.samples.size() + grid.hop - padded.samples.size() % grid.hop, 0.0);
  }
  AudioSignal filtered = voice_band_filter(padded);
  Spectrogram spec = stft(filtered, grid);
  MaskPair masks = predict_mask_frames(w, spec, filtered.samples);
  AudioSignal out = synthesize_from_masks(spec, masks, w.config, opts.causal_smoothing);
  out.samples.resize(in.samples.size());  // drop the synthesis tail past the input
  return out;
}

// Upper bound on the chain: ideal ratio masks from the ground-truth triple
// pushed through the same synthesis path (no smoothing — the masks are
// already consistent frame to frame).
inline AudioSignal denoise_oracle(const MixtureTriple& triple, const ModelConfig& config) {
  const FrameGrid grid = config.grid();
  AudioSignal clean_f = voice_band_filter(triple.clean);
  AudioSignal noise_f = voice_band_filter(triple.scaled_noise);
  AudioSignal mix_f = voice_band_filter(triple.mix);
  Spectrogram spec_mix = stft(mix_f, grid);
  MaskPair masks = ideal_masks(stft(clean_f, grid), stft(noise_f, grid), spec_mix);
  ReconstructionSpec rec;
  rec.exponent_L = config.exponent_L;
  AudioSignal out = reconstruct(apply_masks(spec_mix, masks, rec), spec_mix);
  out.samples.resize(triple.mix.samples.size());
  return out;
}

}  // namespace clarity
