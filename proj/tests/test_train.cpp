#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "clarity/model.hpp"
#include "clarity/rng.hpp"
#include "clarity/train.hpp"

namespace fs = std::filesystem;

namespace clarity {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.context_frames = 3;
  c.frame_length = 16;
  c.hop = 8;
  c.n_bins = 9;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.mlp_hidden = {12};
  c.dropout_rate = 0.1;
  c.smoothing = SmoothingSpec{1.0, 2};
  return c;
}

TrainingExample random_example(const ModelConfig& c, Rng& rng) {
  TrainingExample ex;
  ex.log_features = RealMat(c.context_frames, c.n_bins);
  for (double& v : ex.log_features.data()) v = rng.uniform(-6.0, 2.0);
  ex.raw_feature.resize(c.frame_length);
  for (double& v : ex.raw_feature) v = rng.uniform(-0.5, 0.5);
  ex.clean_target.resize(c.n_bins);
  ex.noise_target.resize(c.n_bins);
  for (double& v : ex.clean_target) v = rng.uniform(0.05, 0.95);
  for (double& v : ex.noise_target) v = rng.uniform(0.05, 0.95);
  return ex;
}

std::vector<TrainingExample> random_dataset(const ModelConfig& c, std::size_t n,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_example(c, rng));
  return out;
}

ModelWeights fresh_model(const ModelConfig& c, std::uint64_t seed,
                         const std::vector<TrainingExample>& train) {
  ModelWeights w = build_model(c, seed);
  w.norm = fit_normalization(train);
  return w;
}

std::vector<double> param_values(const ModelWeights& w) {
  std::vector<double> out;
  for (const auto& p : w.store) {
    out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  }
  return out;
}

TEST(Train, OverfitsTinyDataset) {
  ModelConfig c = tiny_config();
  c.dropout_rate = 0.0;
  auto data = random_dataset(c, 6, 11);
  ModelWeights w = fresh_model(c, 5, data);

  TrainOptions opt;
  opt.max_epochs = 600;
  opt.batch_size = 3;
  opt.patience = 600;
  opt.target_loss = 5e-3;
  opt.adam.lr = 5e-3;
  opt.seed = 3;
  TrainResult r = train_model(w, data, {}, opt);

  ASSERT_FALSE(r.diverged);
  ASSERT_FALSE(r.history.empty());
  EXPECT_LT(r.history.back().train_loss, 5e-3);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
}

TEST(Train, DeterministicGivenSeed) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 6, 21);
  auto val = random_dataset(c, 3, 22);

  TrainOptions opt;
  opt.max_epochs = 5;
  opt.batch_size = 3;
  opt.seed = 9;

  ModelWeights w1 = fresh_model(c, 2, data);
  ModelWeights w2 = fresh_model(c, 2, data);
  TrainResult r1 = train_model(w1, data, val, opt);
  TrainResult r2 = train_model(w2, data, val, opt);

  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    EXPECT_EQ(r1.history[i].train_loss, r2.history[i].train_loss);
    EXPECT_EQ(r1.history[i].val_loss, r2.history[i].val_loss);
  }
  EXPECT_EQ(param_values(w1), param_values(w2));
}

TEST(Train, RestoresBestValidationEpoch) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 6, 31);
  auto val = random_dataset(c, 3, 32);
  ModelWeights w = fresh_model(c, 4, data);

  TrainOptions opt;
  opt.max_epochs = 8;
  opt.batch_size = 3;
  opt.patience = 8;
  opt.seed = 1;
  TrainResult r = train_model(w, data, val, opt);

  ASSERT_FALSE(r.history.empty());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  for (const auto& rec : r.history) {
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_epoch = rec.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_loss, best);
  // returned weights are the best-epoch snapshot
  EXPECT_DOUBLE_EQ(evaluate_loss(w, val), r.best_val_loss);
}

TEST(Train, PlateauStopsAfterPatience) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 4, 41);
  ModelWeights w = fresh_model(c, 6, data);

  TrainOptions opt;
  opt.max_epochs = 50;
  opt.batch_size = 1;  // keeps batch-norm running stats frozen too
  opt.patience = 3;
  opt.seed = 7;
  // A step too small to move any double: validation never improves after
  // epoch one, so the plateau rule must fire.
  opt.adam.lr = 1e-300;
  TrainResult r = train_model(w, data, {}, opt);

  ASSERT_FALSE(r.diverged);
  EXPECT_EQ(r.best_epoch, 1u);
  EXPECT_EQ(r.epochs_run, 1u + opt.patience);
}

TEST(Train, TargetLossStopsImmediately) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 4, 51);
  ModelWeights w = fresh_model(c, 6, data);

  TrainOptions opt;
  opt.max_epochs = 50;
  opt.target_loss = 10.0;  // any epoch satisfies it
  opt.seed = 7;
  TrainResult r = train_model(w, data, {}, opt);
  EXPECT_EQ(r.epochs_run, 1u);
}

TEST(Train, NonFiniteDataRollsBack) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 4, 61);
  ModelWeights w = fresh_model(c, 6, data);
  const std::vector<double> before = param_values(w);

  data[2].raw_feature[0] = std::numeric_limits<double>::quiet_NaN();
  TrainOptions opt;
  opt.max_epochs = 10;
  opt.batch_size = 4;
  opt.seed = 7;
  TrainResult r = train_model(w, data, {}, opt);

  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(param_values(w), before);
}

TEST(Train, BatchNormStatsMoveOnlyInTrainingBatches) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 6, 71);

  ModelWeights batched = fresh_model(c, 3, data);
  const RealMat mean_before = batched.raw_bn.running_mean;
  TrainOptions opt;
  opt.max_epochs = 1;
  opt.batch_size = 3;
  opt.seed = 2;
  train_model(batched, data, {}, opt);
  double moved = 0.0;
  for (std::size_t j = 0; j < mean_before.cols(); ++j) {
    moved += std::abs(batched.raw_bn.running_mean(0, j) - mean_before(0, j));
  }
  EXPECT_GT(moved, 0.0);

  // batches of one fall back to the running statistics and leave them alone
  ModelWeights single = fresh_model(c, 3, data);
  opt.batch_size = 1;
  train_model(single, data, {}, opt);
  for (std::size_t j = 0; j < mean_before.cols(); ++j) {
    EXPECT_EQ(single.raw_bn.running_mean(0, j), mean_before(0, j));
    EXPECT_EQ(single.raw_bn.running_var(0, j), 1.0);
  }
}

TEST(Train, ValidationUsesEvalMode) {
  // With dropout active in training, two evaluations of the same weights
  // must still agree exactly: evaluation may not consume randomness.
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 4, 81);
  ModelWeights w = fresh_model(c, 3, data);
  const double a = evaluate_loss(w, data);
  const double b = evaluate_loss(w, data);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::isfinite(a));
}

TEST(Train, LossCsvRoundTrips) {
  std::vector<EpochRecord> history = {
      {1, 0.5, 0.625}, {2, 0.25, 0.375}, {3, 0.125, 0.25}};
  fs::path path = fs::temp_directory_path() / "clarity_train_loss_test.csv";
  write_loss_csv(path.string(), history);

  std::ifstream in(path);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "epoch,train_loss,val_loss");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string epoch, train, val;
    ASSERT_TRUE(std::getline(row, epoch, ','));
    ASSERT_TRUE(std::getline(row, train, ','));
    ASSERT_TRUE(std::getline(row, val, ','));
    EXPECT_EQ(std::stoul(epoch), history[rows].epoch);
    EXPECT_DOUBLE_EQ(std::stod(train), history[rows].train_loss);
    EXPECT_DOUBLE_EQ(std::stod(val), history[rows].val_loss);
    ++rows;
  }
  EXPECT_EQ(rows, history.size());
  fs::remove(path);
}

TEST(Train, RejectsBadOptionsAndEmptyData) {
  ModelConfig c = tiny_config();
  auto data = random_dataset(c, 2, 91);
  ModelWeights w = fresh_model(c, 3, data);

  TrainOptions opt;
  opt.max_epochs = 0;
  EXPECT_THROW(train_model(w, data, {}, opt), std::invalid_argument);
  opt = {};
  opt.batch_size = 0;
  EXPECT_THROW(train_model(w, data, {}, opt), std::invalid_argument);
  opt = {};
  EXPECT_THROW(train_model(w, {}, {}, opt), DataError);

  ModelWeights no_norm = build_model(c, 3);
  no_norm.norm.mean.clear();
  no_norm.norm.std_dev.clear();
  EXPECT_THROW(train_model(no_norm, data, {}, opt), std::invalid_argument);
}

}  // namespace
}  // namespace clarity
