#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/common.hpp"
#include "clarity/config.hpp"
#include "clarity/data.hpp"
#include "clarity/graph.hpp"
#include "clarity/layers.hpp"
#include "clarity/rng.hpp"
#include "clarity/tensor.hpp"

namespace clarity {

inline constexpr char kWeightMagic[8] = {'C', 'L', 'A', 'R', 'I', 'T', 'Y', 'W'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

// Dual-branch mask-regression model: T spectral tokens + 1 raw-audio token,
// pre-norm attention stack, flattened MLP head, sigmoid mask pair for the
// newest frame. Handles point into `store`; copying is therefore disabled.
struct ModelWeights {
  ModelConfig config;
  std::uint32_t format_version = kWeightFormatVersion;
  ParamStore store;
  NormalizationStats norm;  // per-bin log-power feature statistics

  DenseParams input_proj;  // n_bins -> d_model, one token per frame
  DenseParams raw_embed;   // frame_length -> d_model
  BatchNormLayer raw_bn;
  Param* positional = nullptr;  // n_tokens x d_model
  struct Layer {
    LayerNormParams ln;
    MhaParams attn;
  };
  std::vector<Layer> layers;
  LayerNormParams final_ln;
  std::vector<DenseParams> mlp;
  DenseParams out_proj;  // last hidden -> 2 * n_bins

  ModelWeights() = default;
  ModelWeights(const ModelWeights&) = delete;
  ModelWeights& operator=(const ModelWeights&) = delete;
  ModelWeights(ModelWeights&&) = default;
  ModelWeights& operator=(ModelWeights&&) = default;
};

struct MaskPrediction {
  std::vector<double> clean_mask_frame;
  std::vector<double> noise_mask_frame;
};

inline std::size_t expected_parameter_count(const ModelConfig& c) {
  std::size_t n = 0;
  n += (c.n_bins + 1) * c.d_model;        // input projection
  n += (c.frame_length + 1) * c.d_model;  // raw embedding
  n += 2 * c.d_model;                     // raw batch norm affine
  n += c.n_tokens() * c.d_model;          // positional table
  n += c.n_layers * (2 * c.d_model + 4 * (c.d_model + 1) * c.d_model);
  n += 2 * c.d_model;  // final layer norm
  std::size_t width = c.n_tokens() * c.d_model;
  for (std::size_t h : c.mlp_hidden) {
    n += (width + 1) * h;
    width = h;
  }
  n += (width + 1) * 2 * c.n_bins;
  return n;
}

inline ModelWeights build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelWeights w;
  w.config = config;
  Rng rng(seed);
  ParamStore& s = w.store;

  w.input_proj = make_dense(s, "input_proj", config.n_bins, config.d_model, rng);
  w.raw_embed = make_dense(s, "raw_embed", config.frame_length, config.d_model, rng);
  w.raw_bn = make_batch_norm(s, "raw_bn", config.d_model);
  w.positional = &s.add("positional", config.n_tokens(), config.d_model);
  init_uniform_fan_in(*w.positional, config.d_model, rng);

  for (std::size_t i = 0; i < config.n_layers; ++i) {
    const std::string prefix = "layers." + std::to_string(i);
    ModelWeights::Layer layer;
    layer.ln = make_layer_norm(s, prefix + ".ln", config.d_model);
    layer.attn = make_mha(s, prefix + ".attn", config.d_model, rng);
    w.layers.push_back(layer);
  }
  w.final_ln = make_layer_norm(s, "final_ln", config.d_model);

  std::size_t width = config.n_tokens() * config.d_model;
  for (std::size_t i = 0; i < config.mlp_hidden.size(); ++i) {
    w.mlp.push_back(make_dense(s, "mlp." + std::to_string(i), width, config.mlp_hidden[i], rng));
    width = config.mlp_hidden[i];
  }
  w.out_proj = make_dense(s, "output", width, 2 * config.n_bins, rng);

  w.norm.mean.assign(config.n_bins, 0.0);
  w.norm.std_dev.assign(config.n_bins, 1.0);
  return w;
}

// Raw segments through the embedding projection only. Batch normalization is
// left to the caller: training pushes a whole minibatch through it jointly,
// inference uses the running statistics on a single row.
inline Var embed_raw_rows(Graph& g, ModelWeights& w, const RealMat& raw_rows) {
  if (raw_rows.cols() != w.config.frame_length) {
    throw std::invalid_argument("embed_raw_rows: raw feature length mismatch");
  }
  return dense(g, g.input(raw_rows), w.raw_embed);
}

// Feature fusion: normalized spectral frames -> tokens, plus one already
// batch-normalized raw token, learned positions added.
inline Var fuse_tokens(Graph& g, ModelWeights& w, const RealMat& log_features, Var raw_token) {
  const ModelConfig& c = w.config;
  if (log_features.rows() != c.context_frames || log_features.cols() != c.n_bins) {
    throw std::invalid_argument("fuse_tokens: expected " + std::to_string(c.context_frames) +
                                "x" + std::to_string(c.n_bins) + " features");
  }
  if (g.val(raw_token).rows() != 1 || g.val(raw_token).cols() != c.d_model) {
    throw std::invalid_argument("fuse_tokens: raw token must be 1x" + std::to_string(c.d_model));
  }
  if (w.norm.mean.size() != c.n_bins || w.norm.std_dev.size() != c.n_bins) {
    throw std::invalid_argument("fuse_tokens: normalization stats missing");
  }
  RealMat feats = log_features;
  normalize_features(feats, w.norm);
  Var spectral = dense(g, g.input(feats), w.input_proj);
  Var tokens = g.concat_rows(spectral, raw_token);
  return g.add(tokens, g.param(*w.positional));
}

inline Var build_input_tokens(Graph& g, ModelWeights& w, const RealMat& log_features,
                              const std::vector<double>& raw_feature) {
  if (raw_feature.size() != w.config.frame_length) {
    throw std::invalid_argument("build_input_tokens: raw feature length mismatch");
  }
  RealMat raw(1, w.config.frame_length);
  std::copy(raw_feature.begin(), raw_feature.end(), raw.row_ptr(0));
  Var raw_token = batch_norm(g, embed_raw_rows(g, w, raw), w.raw_bn, /*training=*/false);
  return fuse_tokens(g, w, log_features, raw_token);
}

struct ModelOutput {
  Var clean;  // 1 x n_bins, in (0, 1)
  Var noise;  // 1 x n_bins, in (0, 1)
};

inline ModelOutput model_head(Graph& g, ModelWeights& w, Var tokens, bool training,
                              Rng& dropout_rng) {
  const ModelConfig& c = w.config;
  Var t = tokens;
  for (auto& layer : w.layers) {
    t = g.add(t, multi_head_attention(g, layer_norm(g, t, layer.ln), layer.attn, c.n_heads));
  }
  t = layer_norm(g, t, w.final_ln);
  Var flat = g.reshape(t, 1, c.n_tokens() * c.d_model);
  for (auto& dense_params : w.mlp) {
    flat = g.relu(dense(g, flat, dense_params));
    flat = g.dropout(flat, c.dropout_rate, training, dropout_rng);
  }
  Var out = dense(g, flat, w.out_proj);
  ModelOutput o;
  o.clean = g.sigmoid(g.slice_cols(out, 0, c.n_bins));
  o.noise = g.sigmoid(g.slice_cols(out, c.n_bins, 2 * c.n_bins));
  return o;
}

inline ModelOutput model_forward(Graph& g, ModelWeights& w, const RealMat& log_features,
                                 const std::vector<double>& raw_feature, bool training,
                                 Rng& dropout_rng) {
  return model_head(g, w, build_input_tokens(g, w, log_features, raw_feature), training,
                    dropout_rng);
}

inline MaskPrediction predict_masks(ModelWeights& w, const RealMat& log_features,
                                    const std::vector<double>& raw_feature) {
  Graph g;
  Rng unused(0);
  ModelOutput out = model_forward(g, w, log_features, raw_feature, /*training=*/false, unused);
  MaskPrediction p;
  p.clean_mask_frame.assign(g.val(out.clean).data().begin(), g.val(out.clean).data().end());
  p.noise_mask_frame.assign(g.val(out.noise).data().begin(), g.val(out.noise).data().end());
  return p;
}

// ---- weight file ----
// Layout (little-endian): magic, u32 version, config block, u32 tensor count,
// named f32 tensors (store order, then batch-norm running stats), f64
// normalization statistics.

namespace detail {

inline void append_config(std::string& out, const ModelConfig& c) {
  put_u32le(out, static_cast<std::uint32_t>(c.context_frames));
  put_u32le(out, static_cast<std::uint32_t>(c.n_bins));
  put_u32le(out, static_cast<std::uint32_t>(c.frame_length));
  put_u32le(out, static_cast<std::uint32_t>(c.hop));
  put_u32le(out, static_cast<std::uint32_t>(c.d_model));
  put_u32le(out, static_cast<std::uint32_t>(c.n_layers));
  put_u32le(out, static_cast<std::uint32_t>(c.n_heads));
  put_u32le(out, static_cast<std::uint32_t>(c.mlp_hidden.size()));
  for (std::size_t h : c.mlp_hidden) put_u32le(out, static_cast<std::uint32_t>(h));
  put_f64le(out, c.dropout_rate);
  put_f64le(out, c.exponent_L);
  put_f64le(out, c.smoothing.sigma);
  put_u32le(out, static_cast<std::uint32_t>(c.smoothing.truncation_radius));
}

class WeightCursor {
 public:
  WeightCursor(const unsigned char* p, const unsigned char* end, std::string context)
      : p_(p), end_(end), context_(std::move(context)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(p_[0]) |
                      (static_cast<std::uint32_t>(p_[1]) << 8) |
                      (static_cast<std::uint32_t>(p_[2]) << 16) |
                      (static_cast<std::uint32_t>(p_[3]) << 24);
    p_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p_[i];
    p_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  void need(std::size_t n, const char* what) const {
    if (static_cast<std::size_t>(end_ - p_) < n) {
      throw FormatError(context_ + ": truncated reading " + what);
    }
  }

  const unsigned char* pos() const { return p_; }
  const unsigned char* end() const { return end_; }
  void advance(const unsigned char* to) { p_ = to; }

 private:
  const unsigned char* p_;
  const unsigned char* end_;
  std::string context_;
};

inline ModelConfig read_config(WeightCursor& cur, const std::string& context) {
  ModelConfig c;
  c.context_frames = cur.u32("config context_frames");
  c.n_bins = cur.u32("config n_bins");
  c.frame_length = cur.u32("config frame_length");
  c.hop = cur.u32("config hop");
  c.d_model = cur.u32("config d_model");
  c.n_layers = cur.u32("config n_layers");
  c.n_heads = cur.u32("config n_heads");
  const std::uint32_t n_hidden = cur.u32("config mlp depth");
  if (n_hidden > 64) throw FormatError(context + ": implausible MLP depth");
  c.mlp_hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) c.mlp_hidden.push_back(cur.u32("config mlp width"));
  c.dropout_rate = cur.f64("config dropout");
  c.exponent_L = cur.f64("config exponent");
  c.smoothing.sigma = cur.f64("config smoothing sigma");
  c.smoothing.truncation_radius = static_cast<int>(cur.u32("config smoothing radius"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(context + ": invalid config in header: " + e.what());
  }
  return c;
}

}  // namespace detail

inline void save_weights(const ModelWeights& w, const std::string& path) {
  std::string out;
  out.append(kWeightMagic, sizeof kWeightMagic);
  detail::put_u32le(out, w.format_version);
  detail::append_config(out, w.config);

  detail::put_u32le(out, static_cast<std::uint32_t>(w.store.count() + 2));
  for (const auto& p : w.store) append_named_tensor(out, p.name, Tensor::from_mat(p.value));
  append_named_tensor(out, "raw_bn.running_mean", Tensor::from_mat(w.raw_bn.running_mean));
  append_named_tensor(out, "raw_bn.running_var", Tensor::from_mat(w.raw_bn.running_var));

  detail::put_u32le(out, static_cast<std::uint32_t>(w.norm.mean.size()));
  for (double v : w.norm.mean) detail::put_f64le(out, v);
  for (double v : w.norm.std_dev) detail::put_f64le(out, v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_weights: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("save_weights: write failed for " + path);
}

inline ModelWeights load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_weights: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* begin = reinterpret_cast<const unsigned char*>(bytes.data());
  detail::WeightCursor cur(begin, begin + bytes.size(), path);

  cur.need(sizeof kWeightMagic, "magic");
  if (std::memcmp(cur.pos(), kWeightMagic, sizeof kWeightMagic) != 0) {
    throw FormatError(path + ": not a weight file (bad magic)");
  }
  cur.advance(cur.pos() + sizeof kWeightMagic);
  const std::uint32_t version = cur.u32("format version");
  if (version != kWeightFormatVersion) {
    throw FormatError(path + ": unsupported format version " + std::to_string(version));
  }
  const ModelConfig config = detail::read_config(cur, path);

  ModelWeights w = build_model(config, /*seed=*/0);
  w.format_version = version;

  const std::uint32_t n_tensors = cur.u32("tensor count");
  if (n_tensors != w.store.count() + 2) {
    throw FormatError(path + ": expected " + std::to_string(w.store.count() + 2) +
                      " tensors, file declares " + std::to_string(n_tensors));
  }
  TensorReader reader(cur.pos(), cur.end(), path);
  std::string name;
  Tensor t;
  std::size_t filled = 0;
  bool got_rm = false, got_rv = false;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    if (!reader.next(name, t)) throw FormatError(path + ": truncated tensor stream");
    RealMat* dst = nullptr;
    if (name == "raw_bn.running_mean") {
      dst = &w.raw_bn.running_mean;
      got_rm = true;
    } else if (name == "raw_bn.running_var") {
      dst = &w.raw_bn.running_var;
      got_rv = true;
    } else if (Param* p = w.store.find(name)) {
      dst = &p->value;
      ++filled;
    } else {
      throw FormatError(path + ": unknown tensor " + name);
    }
    RealMat m = t.to_mat();
    if (!m.same_shape(*dst)) {
      throw FormatError(path + ": shape mismatch for tensor " + name);
    }
    *dst = std::move(m);
  }
  if (filled != w.store.count() || !got_rm || !got_rv) {
    throw FormatError(path + ": duplicate or missing tensors");
  }

  // Norm stats trail the tensor block.
  detail::WeightCursor tail(reader.position(), cur.end(), path);
  const std::uint32_t n_bins = tail.u32("normalization bin count");
  if (n_bins != config.n_bins) {
    throw FormatError(path + ": normalization stats cover " + std::to_string(n_bins) +
                      " bins, config has " + std::to_string(config.n_bins));
  }
  w.norm.mean.resize(n_bins);
  w.norm.std_dev.resize(n_bins);
  for (auto& v : w.norm.mean) v = tail.f64("normalization mean");
  for (auto& v : w.norm.std_dev) {
    v = tail.f64("normalization std");
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw FormatError(path + ": normalization std must be positive");
    }
  }
  if (tail.pos() != tail.end()) throw FormatError(path + ": trailing bytes after weights");
  return w;
}

}  // namespace clarity
