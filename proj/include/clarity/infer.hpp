#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "clarity/layers.hpp"
#include "clarity/model.hpp"

namespace clarity {

// Allocation-free forward pass over frozen weights. Arithmetic replays the
// tape ops in the same order (including summation order), so outputs agree
// with the graph path to rounding noise.
class InferenceEngine {
 public:
  explicit InferenceEngine(const ModelWeights& w) : w_(&w) {
    const ModelConfig& c = w.config;
    const std::size_t n = c.n_tokens();
    const std::size_t d = c.d_model;
    norm_feats_.resize(c.context_frames * c.n_bins);
    tok_.resize(n * d);
    ln_.resize(n * d);
    q_.resize(n * d);
    k_.resize(n * d);
    v_.resize(n * d);
    heads_.resize(n * d);
    proj_.resize(n * d);
    scores_.resize(n * n);
    bn_inv_.resize(d);
    std::size_t widest = n * d;
    for (std::size_t h : c.mlp_hidden) widest = std::max(widest, h);
    mlp_a_.resize(widest);
    mlp_b_.resize(widest);
    out_.resize(2 * c.n_bins);
  }

  const ModelConfig& config() const { return w_->config; }

  // log_feats: context_frames x n_bins row-major (unnormalized log power),
  // raw: frame_length samples. Writes n_bins mask values to each output.
  void predict(const double* log_feats, const double* raw, double* clean, double* noise) {
    const ModelConfig& c = w_->config;
    const std::size_t T = c.context_frames;
    const std::size_t B = c.n_bins;
    const std::size_t n = c.n_tokens();
    const std::size_t d = c.d_model;

    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t m = 0; m < B; ++m) {
        norm_feats_[t * B + m] =
            (log_feats[t * B + m] - w_->norm.mean[m]) / w_->norm.std_dev[m];
      }
    }
    dense_fwd(norm_feats_.data(), T, B, w_->input_proj, tok_.data());

    // raw token: embed, batch norm with running statistics
    double* raw_tok = tok_.data() + T * d;
    dense_fwd(raw, 1, c.frame_length, w_->raw_embed, raw_tok);
    const RealMat& rm = w_->raw_bn.running_mean;
    const RealMat& rv = w_->raw_bn.running_var;
    const double* bn_g = w_->raw_bn.gain->value.row_ptr(0);
    const double* bn_b = w_->raw_bn.bias->value.row_ptr(0);
    for (std::size_t j = 0; j < d; ++j) bn_inv_[j] = 1.0 / std::sqrt(rv(0, j) + kNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      raw_tok[j] = ((raw_tok[j] - rm(0, j)) * bn_inv_[j]) * bn_g[j] + bn_b[j];
    }

    const double* pos = w_->positional->value.data().data();
    for (std::size_t i = 0; i < n * d; ++i) tok_[i] += pos[i];

    for (const auto& layer : w_->layers) {
      layer_norm_fwd(tok_.data(), n, d, layer.ln, ln_.data());
      attention_fwd(ln_.data(), n, d, c.n_heads, layer.attn);
      for (std::size_t i = 0; i < n * d; ++i) tok_[i] += proj_[i];
    }
    layer_norm_fwd(tok_.data(), n, d, w_->final_ln, ln_.data());

    // flatten is free: ln_ is already the 1 x (n*d) row
    const double* x = ln_.data();
    std::size_t width = n * d;
    for (std::size_t l = 0; l < w_->mlp.size(); ++l) {
      double* y = l % 2 == 0 ? mlp_a_.data() : mlp_b_.data();
      dense_fwd(x, 1, width, w_->mlp[l], y);
      width = w_->mlp[l].w->value.cols();
      for (std::size_t j = 0; j < width; ++j) y[j] = y[j] > 0.0 ? y[j] : 0.0;
      x = y;
    }
    dense_fwd(x, 1, width, w_->out_proj, out_.data());
    for (std::size_t m = 0; m < B; ++m) clean[m] = 1.0 / (1.0 + std::exp(-out_[m]));
    for (std::size_t m = 0; m < B; ++m) noise[m] = 1.0 / (1.0 + std::exp(-out_[B + m]));
  }

 private:
  // x: m x in, out: m x cols(w). Same loop order and zero-skip as the tape's
  // matmul so sums round identically.
  static void dense_fwd(const double* x, std::size_t m, std::size_t in, const DenseParams& p,
                        double* out) {
    const RealMat& W = p.w->value;
    if (W.rows() != in) throw std::invalid_argument("dense_fwd: width mismatch");
    const std::size_t o = W.cols();
    for (std::size_t i = 0; i < m * o; ++i) out[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double* xi = x + i * in;
      double* oi = out + i * o;
      for (std::size_t c = 0; c < in; ++c) {
        const double xv = xi[c];
        if (xv == 0.0) continue;
        const double* wr = W.row_ptr(c);
        for (std::size_t j = 0; j < o; ++j) oi[j] += xv * wr[j];
      }
    }
    const double* b = p.b->value.row_ptr(0);
    for (std::size_t i = 0; i < m; ++i) {
      double* oi = out + i * o;
      for (std::size_t j = 0; j < o; ++j) oi[j] += b[j];
    }
  }

  static void layer_norm_fwd(const double* x, std::size_t n, std::size_t d,
                             const LayerNormParams& p, double* out) {
    const double* g = p.gain->value.row_ptr(0);
    const double* b = p.bias->value.row_ptr(0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = x + i * d;
      double* oi = out + i * d;
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += xi[j];
      const double mu = acc / static_cast<double>(d);
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double xc = xi[j] - mu;
        sq += xc * xc;
      }
      const double var = sq / static_cast<double>(d);
      const double inv = std::pow(var + kNormEps, -0.5);
      for (std::size_t j = 0; j < d; ++j) oi[j] = ((xi[j] - mu) * inv) * g[j] + b[j];
    }
  }

  // Writes the projected attention output into proj_.
  void attention_fwd(const double* x, std::size_t n, std::size_t d, std::size_t n_heads,
                     const MhaParams& p) {
    dense_fwd(x, n, d, p.q, q_.data());
    dense_fwd(x, n, d, p.k, k_.data());
    dense_fwd(x, n, d, p.v, v_.data());
    const std::size_t dk = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t c0 = h * dk;
      for (std::size_t i = 0; i < n * n; ++i) scores_[i] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* qi = q_.data() + i * d + c0;
        double* si = scores_.data() + i * n;
        for (std::size_t c = 0; c < dk; ++c) {
          const double qv = qi[c];
          if (qv == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) si[j] += qv * k_[j * d + c0 + c];
        }
      }
      for (std::size_t i = 0; i < n * n; ++i) scores_[i] *= scale;
      for (std::size_t i = 0; i < n; ++i) {
        double* si = scores_.data() + i * n;
        double mx = si[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, si[j]);
        for (std::size_t j = 0; j < n; ++j) si[j] = std::exp(si[j] - mx);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += si[j];
        for (std::size_t j = 0; j < n; ++j) si[j] /= sum;
      }
      for (std::size_t i = 0; i < n; ++i) {
        double* hi = heads_.data() + i * d + c0;
        for (std::size_t c = 0; c < dk; ++c) hi[c] = 0.0;
        const double* si = scores_.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          const double sv = si[j];
          if (sv == 0.0) continue;
          const double* vj = v_.data() + j * d + c0;
          for (std::size_t c = 0; c < dk; ++c) hi[c] += sv * vj[c];
        }
      }
    }
    dense_fwd(heads_.data(), n, d, p.o, proj_.data());
  }

  const ModelWeights* w_;
  std::vector<double> norm_feats_, tok_, ln_, q_, k_, v_, heads_, proj_, scores_;
  std::vector<double> bn_inv_, mlp_a_, mlp_b_, out_;
};

}  // namespace clarity
