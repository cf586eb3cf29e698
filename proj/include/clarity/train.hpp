#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/common.hpp"
#include "clarity/data.hpp"
#include "clarity/graph.hpp"
#include "clarity/layers.hpp"
#include "clarity/model.hpp"
#include "clarity/rng.hpp"

namespace clarity {

struct TrainOptions {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 16;
  std::size_t patience = 5;   // epochs without validation improvement before stopping
  double target_loss = 0.0;   // stop once train loss falls to this; 0 disables
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_epochs == 0) throw std::invalid_argument("train: max_epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (patience == 0) throw std::invalid_argument("train: patience must be >= 1");
    if (target_loss < 0.0) throw std::invalid_argument("train: target_loss must be >= 0");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool diverged = false;
};

namespace detail {

// Everything mutated by an optimizer step, for rollback and best-epoch restore.
struct ModelSnapshot {
  std::vector<RealMat> values;
  RealMat running_mean;
  RealMat running_var;
};

inline ModelSnapshot take_snapshot(const ModelWeights& w) {
  ModelSnapshot s;
  s.values.reserve(w.store.count());
  for (const auto& p : w.store) s.values.push_back(p.value);
  s.running_mean = w.raw_bn.running_mean;
  s.running_var = w.raw_bn.running_var;
  return s;
}

inline void restore_snapshot(ModelWeights& w, const ModelSnapshot& s) {
  std::size_t i = 0;
  for (auto& p : w.store) p.value = s.values[i++];
  w.raw_bn.running_mean = s.running_mean;
  w.raw_bn.running_var = s.running_var;
}

inline RealMat joint_target(const TrainingExample& ex) {
  RealMat t(1, ex.clean_target.size() + ex.noise_target.size());
  std::copy(ex.clean_target.begin(), ex.clean_target.end(), t.row_ptr(0));
  std::copy(ex.noise_target.begin(), ex.noise_target.end(),
            t.row_ptr(0) + ex.clean_target.size());
  return t;
}

// Mean example loss over one batch. The raw segments share one batch-norm
// node so training normalizes the minibatch jointly; a trailing batch of one
// falls back to the running statistics.
inline Var batch_loss(Graph& g, ModelWeights& w, const std::vector<TrainingExample>& examples,
                      const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                      bool training, Rng& dropout_rng) {
  const std::size_t b = end - begin;
  RealMat raw(b, w.config.frame_length);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& ex = examples[order[begin + i]];
    if (ex.raw_feature.size() != w.config.frame_length) {
      throw std::invalid_argument("train: raw feature length mismatch");
    }
    std::copy(ex.raw_feature.begin(), ex.raw_feature.end(), raw.row_ptr(i));
  }
  Var raw_tokens = batch_norm(g, embed_raw_rows(g, w, raw), w.raw_bn, training && b >= 2);

  Var total{-1};
  for (std::size_t i = 0; i < b; ++i) {
    const auto& ex = examples[order[begin + i]];
    Var tokens = fuse_tokens(g, w, ex.log_features, g.slice_rows(raw_tokens, i, i + 1));
    ModelOutput out = model_head(g, w, tokens, training, dropout_rng);
    Var loss = mse_loss(g, g.concat_cols(out.clean, out.noise), joint_target(ex));
    total = i == 0 ? loss : g.add(total, loss);
  }
  return g.scale(total, 1.0 / static_cast<double>(b));
}

}  // namespace detail

// Mean per-example loss in evaluation mode (running stats, no dropout).
inline double evaluate_loss(ModelWeights& w, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) throw DataError("evaluate_loss: no examples");
  Rng unused(0);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  double sum = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Graph g;
    Var loss = detail::batch_loss(g, w, examples, order, i, i + 1, /*training=*/false, unused);
    sum += g.val(loss)(0, 0);
  }
  return sum / static_cast<double>(examples.size());
}

// Minibatch Adam on the joint mask regression. Validation loss is tracked
// every epoch (on the training set when `val` is empty); the weights that
// scored best are restored before returning. A non-finite loss or gradient
// aborts the run and rolls back to the end of the last completed epoch.
inline TrainResult train_model(ModelWeights& w, const std::vector<TrainingExample>& train,
                               const std::vector<TrainingExample>& val,
                               const TrainOptions& opt = {}) {
  opt.validate();
  if (train.empty()) throw DataError("train_model: no training examples");
  if (w.norm.mean.size() != w.config.n_bins) {
    throw std::invalid_argument("train_model: normalization stats missing");
  }
  const std::vector<TrainingExample>& val_set = val.empty() ? train : val;

  AdamState adam(w.store, opt.adam);
  Rng shuffle_rng(opt.seed);
  Rng dropout_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  detail::ModelSnapshot last_good = detail::take_snapshot(w);
  detail::ModelSnapshot best = last_good;
  std::size_t stale_epochs = 0;

  for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double weighted_sum = 0.0;
    bool failed = false;
    try {
      for (std::size_t begin = 0; begin < train.size(); begin += opt.batch_size) {
        const std::size_t end = std::min(begin + opt.batch_size, train.size());
        Graph g;
        Var loss = detail::batch_loss(g, w, train, order, begin, end, /*training=*/true,
                                      dropout_rng);
        w.store.zero_grads();
        g.backward(loss);
        adam.step();
        weighted_sum += g.val(loss)(0, 0) * static_cast<double>(end - begin);
      }
    } catch (const DataError&) {
      failed = true;
    }
    const double train_loss = weighted_sum / static_cast<double>(train.size());
    if (failed || !std::isfinite(train_loss)) {
      detail::restore_snapshot(w, last_good);
      result.diverged = true;
      break;
    }

    const double val_loss = evaluate_loss(w, val_set);
    result.history.push_back({epoch, train_loss, val_loss});
    result.epochs_run = epoch;
    last_good = detail::take_snapshot(w);

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = last_good;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
    }
    if (opt.target_loss > 0.0 && train_loss <= opt.target_loss) break;
    if (stale_epochs >= opt.patience) break;
  }

  if (result.best_epoch > 0) detail::restore_snapshot(w, best);
  return result;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n" << std::setprecision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_loss_csv: cannot open " + path);
  f << out.str();
  if (!f) throw IoError("write_loss_csv: write failed for " + path);
}

}  // namespace clarity
