#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/common.hpp"
#include "clarity/graph.hpp"
#include "clarity/rng.hpp"

namespace clarity {

inline void init_uniform_fan_in(Param& p, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("init_uniform_fan_in: fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : p.value.data()) v = rng.uniform(-bound, bound);
}

inline void init_constant(Param& p, double c) {
  std::fill(p.value.data().begin(), p.value.data().end(), c);
}

// ---- dense ----

struct DenseParams {
  Param* w = nullptr;  // in x out
  Param* b = nullptr;  // 1 x out
};

inline DenseParams make_dense(ParamStore& store, const std::string& name, std::size_t in,
                              std::size_t out, Rng& rng) {
  DenseParams d;
  d.w = &store.add(name + ".w", in, out);
  d.b = &store.add(name + ".b", 1, out);
  init_uniform_fan_in(*d.w, in, rng);
  return d;
}

inline Var dense(Graph& g, Var x, const DenseParams& d) {
  return g.add(g.matmul(x, g.param(*d.w)), g.param(*d.b));
}

// ---- layer norm (row statistics) ----

struct LayerNormParams {
  Param* gain = nullptr;  // 1 x d
  Param* bias = nullptr;  // 1 x d
};

inline constexpr double kNormEps = 1e-5;

inline LayerNormParams make_layer_norm(ParamStore& store, const std::string& name,
                                       std::size_t d) {
  LayerNormParams p;
  p.gain = &store.add(name + ".gain", 1, d);
  p.bias = &store.add(name + ".bias", 1, d);
  init_constant(*p.gain, 1.0);
  return p;
}

inline Var layer_norm(Graph& g, Var x, const LayerNormParams& p) {
  Var mu = g.row_mean(x);
  Var xc = g.sub(x, mu);
  Var var = g.row_mean(g.mul(xc, xc));
  Var inv = g.pow_const(g.add_const(var, kNormEps), -0.5);
  Var normalized = g.mul(xc, inv);
  return g.add(g.mul(normalized, g.param(*p.gain)), g.param(*p.bias));
}

// ---- batch norm (column statistics over the batch dimension) ----

struct BatchNormLayer {
  Param* gain = nullptr;  // 1 x d
  Param* bias = nullptr;  // 1 x d
  RealMat running_mean;   // 1 x d
  RealMat running_var;    // 1 x d, unbiased
  double momentum = 0.1;
};

inline BatchNormLayer make_batch_norm(ParamStore& store, const std::string& name,
                                      std::size_t d) {
  BatchNormLayer bn;
  bn.gain = &store.add(name + ".gain", 1, d);
  bn.bias = &store.add(name + ".bias", 1, d);
  init_constant(*bn.gain, 1.0);
  bn.running_mean = RealMat(1, d);
  bn.running_var = RealMat(1, d, 1.0);
  return bn;
}

inline Var batch_norm(Graph& g, Var x, BatchNormLayer& bn, bool training) {
  const std::size_t d = bn.running_mean.cols();
  if (g.val(x).cols() != d) throw std::invalid_argument("batch_norm: feature width mismatch");
  if (!training) {
    RealMat inv_std(1, d);
    for (std::size_t j = 0; j < d; ++j) {
      inv_std(0, j) = 1.0 / std::sqrt(bn.running_var(0, j) + kNormEps);
    }
    Var xc = g.sub(x, g.constant(bn.running_mean));
    Var normalized = g.mul(xc, g.constant(inv_std));
    return g.add(g.mul(normalized, g.param(*bn.gain)), g.param(*bn.bias));
  }

  const std::size_t n = g.val(x).rows();
  if (n < 2) throw std::invalid_argument("batch_norm: training needs a batch of at least 2");
  Var mu = g.col_mean(x);
  Var xc = g.sub(x, mu);
  Var var = g.col_mean(g.mul(xc, xc));  // biased: used for normalization
  Var inv = g.pow_const(g.add_const(var, kNormEps), -0.5);
  Var normalized = g.mul(xc, inv);
  Var out = g.add(g.mul(normalized, g.param(*bn.gain)), g.param(*bn.bias));

  // Running statistics track the batch moments but never enter the tape.
  const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < d; ++j) {
    bn.running_mean(0, j) =
        (1.0 - bn.momentum) * bn.running_mean(0, j) + bn.momentum * g.val(mu)(0, j);
    bn.running_var(0, j) =
        (1.0 - bn.momentum) * bn.running_var(0, j) + bn.momentum * unbias * g.val(var)(0, j);
  }
  return out;
}

// ---- multi-head self-attention ----

struct MhaParams {
  DenseParams q, k, v, o;
};

inline MhaParams make_mha(ParamStore& store, const std::string& name, std::size_t d,
                          Rng& rng) {
  MhaParams p;
  p.q = make_dense(store, name + ".q", d, d, rng);
  p.k = make_dense(store, name + ".k", d, d, rng);
  p.v = make_dense(store, name + ".v", d, d, rng);
  p.o = make_dense(store, name + ".o", d, d, rng);
  return p;
}

inline Var multi_head_attention(Graph& g, Var x, const MhaParams& p, std::size_t n_heads) {
  const std::size_t d = g.val(x).cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw std::invalid_argument("multi_head_attention: heads must divide model width");
  }
  const std::size_t dk = d / n_heads;
  Var q = dense(g, x, p.q);
  Var k = dense(g, x, p.k);
  Var v = dense(g, x, p.v);

  Var merged{-1};
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t c0 = h * dk;
    const std::size_t c1 = c0 + dk;
    Var qh = g.slice_cols(q, c0, c1);
    Var kh = g.slice_cols(k, c0, c1);
    Var vh = g.slice_cols(v, c0, c1);
    Var scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dk)));
    Var head = g.matmul(softmax_rows(g, scores), vh);
    merged = h == 0 ? head : g.concat_cols(merged, head);
  }
  return dense(g, merged, p.o);
}

// ---- Adam ----

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(ParamStore& store, AdamConfig config = {}) : store_(&store), config_(config) {
    if (!(config.lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
      throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    if (!(config.eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
    for (auto& p : store) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }

  // One bias-corrected update from the gradients currently in the store.
  void step() {
    if (m_.size() != store_->count()) {
      throw std::logic_error("adam: parameter count changed after construction");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::size_t idx = 0;
    for (auto& p : *store_) {
      RealMat& m = m_[idx];
      RealMat& v = v_[idx];
      ++idx;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double gr = p.grad.data()[i];
        double& mi = m.data()[i];
        double& vi = v.data()[i];
        mi = config_.beta1 * mi + (1.0 - config_.beta1) * gr;
        vi = config_.beta2 * vi + (1.0 - config_.beta2) * gr * gr;
        p.value.data()[i] -= config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      }
    }
  }

  std::size_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  ParamStore* store_;
  AdamConfig config_;
  std::vector<RealMat> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace clarity
