#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/dsp.hpp"
#include "clarity/masks.hpp"

namespace clarity {

// Architecture + post-processing knobs. Defaults match the shipped model.
struct ModelConfig {
  std::size_t context_frames = 8;  // causal frames per prediction (T)
  std::size_t n_bins = 65;         // frame_length/2 + 1
  std::size_t frame_length = 128;
  std::size_t hop = 64;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::vector<std::size_t> mlp_hidden = {128, 64};
  double dropout_rate = 0.1;
  double exponent_L = 2.0;
  SmoothingSpec smoothing{1.0, 4};

  std::size_t n_tokens() const { return context_frames + 1; }  // +1 raw token

  FrameGrid grid() const { return FrameGrid::hann(frame_length, hop); }

  void validate() const {
    if (context_frames < 1) throw std::invalid_argument("ModelConfig: T >= 1 required");
    if (n_layers < 1) throw std::invalid_argument("ModelConfig: n_layers >= 1 required");
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
      throw std::invalid_argument("ModelConfig: d_model must be divisible by n_heads");
    }
    if (n_bins != frame_length / 2 + 1) {
      throw std::invalid_argument("ModelConfig: n_bins must equal frame_length/2 + 1");
    }
    if (hop == 0 || hop > frame_length) {
      throw std::invalid_argument("ModelConfig: need 0 < hop <= frame_length");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw std::invalid_argument("ModelConfig: dropout_rate in [0, 1) required");
    }
    if (exponent_L <= 0.0) throw std::invalid_argument("ModelConfig: exponent_L > 0 required");
    smoothing.validate();
  }
};

}  // namespace clarity
