#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "clarity/model.hpp"
#include "clarity/rng.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace clarity {
namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir =
      fs::temp_directory_path() / ("clarity_model_test_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RealMat random_features(const ModelConfig& c, Rng& rng, double scale = 2.0) {
  RealMat m(c.context_frames, c.n_bins);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

std::vector<double> random_raw(const ModelConfig& c, Rng& rng) {
  std::vector<double> raw(c.frame_length);
  for (double& v : raw) v = rng.uniform(-0.5, 0.5);
  return raw;
}

void randomize_stats(ModelWeights& w, Rng& rng) {
  for (auto& v : w.norm.mean) v = rng.uniform(-3.0, 3.0);
  for (auto& v : w.norm.std_dev) v = rng.uniform(0.5, 2.0);
  for (double& v : w.raw_bn.running_mean.data()) v = rng.uniform(-1.0, 1.0);
  for (double& v : w.raw_bn.running_var.data()) v = rng.uniform(0.5, 2.0);
}

TEST(Model, ParameterCountMatchesClosedForm) {
  ModelConfig c;
  ModelWeights w = build_model(c, 1);
  EXPECT_EQ(expected_parameter_count(c), 137410u);
  EXPECT_EQ(w.store.total_parameters(), 137410u);
}

TEST(Model, ParameterCountTracksConfig) {
  ModelConfig c;
  c.d_model = 32;
  c.n_heads = 4;
  c.mlp_hidden = {40};
  ModelWeights w = build_model(c, 1);
  EXPECT_EQ(w.store.total_parameters(), expected_parameter_count(c));
}

TEST(Model, TokenSequenceLengthIsContextPlusOne) {
  ModelConfig small;
  small.context_frames = 1;
  ModelWeights w = build_model(small, 2);
  Rng rng(3);
  Graph g;
  Var tokens = build_input_tokens(g, w, random_features(small, rng), random_raw(small, rng));
  EXPECT_EQ(g.val(tokens).rows(), 2u);
  EXPECT_EQ(g.val(tokens).cols(), small.d_model);

  ModelConfig c;
  ModelWeights w2 = build_model(c, 2);
  Graph g2;
  Var tokens2 = build_input_tokens(g2, w2, random_features(c, rng), random_raw(c, rng));
  EXPECT_EQ(g2.val(tokens2).rows(), 9u);
}

TEST(Model, ZeroFeaturesGiveBiasPlusPositionalTokens) {
  ModelConfig c;
  ModelWeights w = build_model(c, 4);
  // stats stay at the identity (mean 0, std 1) from build_model
  RealMat zeros(c.context_frames, c.n_bins);
  Rng rng(5);
  Graph g;
  Var tokens = build_input_tokens(g, w, zeros, random_raw(c, rng));
  for (std::size_t t = 0; t < c.context_frames; ++t) {
    for (std::size_t j = 0; j < c.d_model; ++j) {
      const double expect = w.input_proj.b->value(0, j) + w.positional->value(t, j);
      EXPECT_NEAR(g.val(tokens)(t, j), expect, 1e-12);
    }
  }
}

TEST(Model, TokensMatchManualComposition) {
  ModelConfig c;
  ModelWeights w = build_model(c, 6);
  Rng rng(7);
  randomize_stats(w, rng);
  for (double& v : w.raw_bn.gain->value.data()) v = rng.uniform(0.5, 1.5);
  for (double& v : w.raw_bn.bias->value.data()) v = rng.uniform(-0.5, 0.5);
  for (double& v : w.input_proj.b->value.data()) v = rng.uniform(-0.2, 0.2);

  RealMat feats = random_features(c, rng);
  std::vector<double> raw = random_raw(c, rng);

  Graph g;
  Var tokens = build_input_tokens(g, w, feats, raw);

  for (std::size_t t = 0; t < c.context_frames; ++t) {
    for (std::size_t j = 0; j < c.d_model; ++j) {
      double acc = w.input_proj.b->value(0, j);
      for (std::size_t m = 0; m < c.n_bins; ++m) {
        const double z = (feats(t, m) - w.norm.mean[m]) / w.norm.std_dev[m];
        acc += z * w.input_proj.w->value(m, j);
      }
      acc += w.positional->value(t, j);
      EXPECT_NEAR(g.val(tokens)(t, j), acc, 1e-9);
    }
  }
  for (std::size_t j = 0; j < c.d_model; ++j) {
    double embedded = w.raw_embed.b->value(0, j);
    for (std::size_t i = 0; i < c.frame_length; ++i) {
      embedded += raw[i] * w.raw_embed.w->value(i, j);
    }
    const double z = (embedded - w.raw_bn.running_mean(0, j)) /
                     std::sqrt(w.raw_bn.running_var(0, j) + 1e-5);
    const double expect =
        z * w.raw_bn.gain->value(0, j) + w.raw_bn.bias->value(0, j) +
        w.positional->value(c.context_frames, j);
    EXPECT_NEAR(g.val(tokens)(c.context_frames, j), expect, 1e-9);
  }
}

TEST(Model, InputValidation) {
  ModelConfig c;
  ModelWeights w = build_model(c, 8);
  Rng rng(9);
  Graph g;
  RealMat bad_rows(c.context_frames + 1, c.n_bins);
  EXPECT_THROW(build_input_tokens(g, w, bad_rows, random_raw(c, rng)), std::invalid_argument);
  RealMat bad_cols(c.context_frames, c.n_bins - 1);
  EXPECT_THROW(build_input_tokens(g, w, bad_cols, random_raw(c, rng)), std::invalid_argument);
  std::vector<double> short_raw(c.frame_length - 1, 0.0);
  EXPECT_THROW(build_input_tokens(g, w, random_features(c, rng), short_raw),
               std::invalid_argument);
}

TEST(Model, OutputsAreSigmoidBoundedAndSized) {
  ModelConfig c;
  ModelWeights w = build_model(c, 10);
  Rng rng(11);
  MaskPrediction p = predict_masks(w, random_features(c, rng, 5.0), random_raw(c, rng));
  ASSERT_EQ(p.clean_mask_frame.size(), c.n_bins);
  ASSERT_EQ(p.noise_mask_frame.size(), c.n_bins);
  for (double v : p.clean_mask_frame) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  for (double v : p.noise_mask_frame) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Model, ForwardIsDeterministicAcrossRebuilds) {
  ModelConfig c;
  Rng rng(12);
  RealMat feats = random_features(c, rng);
  std::vector<double> raw = random_raw(c, rng);

  ModelWeights w1 = build_model(c, 42);
  ModelWeights w2 = build_model(c, 42);
  MaskPrediction p1 = predict_masks(w1, feats, raw);
  MaskPrediction p2 = predict_masks(w2, feats, raw);
  EXPECT_EQ(std::memcmp(p1.clean_mask_frame.data(), p2.clean_mask_frame.data(),
                        p1.clean_mask_frame.size() * sizeof(double)),
            0);
  EXPECT_EQ(std::memcmp(p1.noise_mask_frame.data(), p2.noise_mask_frame.data(),
                        p1.noise_mask_frame.size() * sizeof(double)),
            0);
}

TEST(Model, DifferentSeedsGiveDifferentPredictions) {
  ModelConfig c;
  Rng rng(13);
  RealMat feats = random_features(c, rng);
  std::vector<double> raw = random_raw(c, rng);
  ModelWeights w1 = build_model(c, 1);
  ModelWeights w2 = build_model(c, 2);
  MaskPrediction p1 = predict_masks(w1, feats, raw);
  MaskPrediction p2 = predict_masks(w2, feats, raw);
  double diff = 0.0;
  for (std::size_t i = 0; i < p1.clean_mask_frame.size(); ++i) {
    diff = std::max(diff, std::abs(p1.clean_mask_frame[i] - p2.clean_mask_frame[i]));
  }
  EXPECT_GT(diff, 1e-6);
}

Var batch_loss(Graph& g, ModelWeights& w, const RealMat& feats, const std::vector<double>& raw,
               const RealMat& target) {
  Rng unused(0);
  ModelOutput out = model_forward(g, w, feats, raw, /*training=*/false, unused);
  return mse_loss(g, g.concat_cols(out.clean, out.noise), target);
}

TEST(Model, EveryLayerReceivesGradient) {
  ModelConfig c;
  ModelWeights w = build_model(c, 14);
  Rng rng(15);
  RealMat feats = random_features(c, rng);
  std::vector<double> raw = random_raw(c, rng);
  RealMat target(1, 2 * c.n_bins);
  for (double& v : target.data()) v = rng.uniform(0.0, 1.0);

  w.store.zero_grads();
  Graph g;
  g.backward(batch_loss(g, w, feats, raw, target));

  const std::vector<std::string> prefixes = {
      "input_proj", "raw_embed", "raw_bn", "positional", "layers.0", "layers.1",
      "final_ln",   "mlp.0",     "mlp.1",  "output"};
  for (const auto& prefix : prefixes) {
    bool any_nonzero = false;
    for (const auto& p : w.store) {
      if (p.name.rfind(prefix, 0) != 0) continue;
      for (double v : p.grad.data()) {
        if (v != 0.0) {
          any_nonzero = true;
          break;
        }
      }
      if (any_nonzero) break;
    }
    EXPECT_TRUE(any_nonzero) << "no gradient reached " << prefix;
  }
}

TEST(Model, SampledFiniteDifferenceGradcheck) {
  ModelConfig c;
  ModelWeights w = build_model(c, 16);
  Rng rng(17);
  randomize_stats(w, rng);
  RealMat feats = random_features(c, rng);
  std::vector<double> raw = random_raw(c, rng);
  RealMat target(1, 2 * c.n_bins);
  for (double& v : target.data()) v = rng.uniform(0.0, 1.0);

  w.store.zero_grads();
  {
    Graph g;
    g.backward(batch_loss(g, w, feats, raw, target));
  }

  auto loss_value = [&]() {
    Graph g;
    return g.val(batch_loss(g, w, feats, raw, target))(0, 0);
  };

  std::vector<Param*> params;
  for (auto& p : w.store) params.push_back(&p);

  const std::size_t total = w.store.total_parameters();
  const std::size_t samples = total / 100;  // 1% of parameters
  const double h = 1e-4;
  double max_rel = 0.0;
  std::string where;
  for (std::size_t s = 0; s < samples; ++s) {
    Param* p = params[rng.below(params.size())];
    const std::size_t i = rng.below(p->value.size());
    const double saved = p->value.data()[i];
    p->value.data()[i] = saved + h;
    const double fp = loss_value();
    p->value.data()[i] = saved - h;
    const double fm = loss_value();
    p->value.data()[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = p->grad.data()[i];
    const double rel = std::abs(analytic - numeric) /
                       std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
    if (rel > max_rel) {
      max_rel = rel;
      where = p->name + "[" + std::to_string(i) + "]";
    }
  }
  EXPECT_LT(max_rel, 1e-4) << where;
}

// ---- weight file ----

TEST(WeightFile, RoundTripIsBitExactAtStoredPrecision) {
  ModelConfig c;
  ModelWeights w = build_model(c, 18);
  Rng rng(19);
  randomize_stats(w, rng);

  fs::path dir = temp_dir();
  fs::path p1 = dir / "a.weights";
  fs::path p2 = dir / "b.weights";
  save_weights(w, p1.string());
  ModelWeights w2 = load_weights(p1.string());
  save_weights(w2, p2.string());

  // f32 storage: the second save/load cycle must be a fixed point.
  EXPECT_EQ(read_file(p1), read_file(p2));
  ModelWeights w3 = load_weights(p2.string());
  auto it2 = w2.store.begin();
  auto it3 = w3.store.begin();
  for (; it2 != w2.store.end(); ++it2, ++it3) {
    ASSERT_EQ(it2->name, it3->name);
    ASSERT_TRUE(it2->value.same_shape(it3->value));
    EXPECT_EQ(std::memcmp(it2->value.data().data(), it3->value.data().data(),
                          it2->value.size() * sizeof(double)),
              0)
        << it2->name;
  }
  // f64 fields survive the first trip bit-exactly.
  EXPECT_EQ(std::memcmp(w.norm.mean.data(), w2.norm.mean.data(),
                        w.norm.mean.size() * sizeof(double)),
            0);
  EXPECT_EQ(std::memcmp(w.norm.std_dev.data(), w2.norm.std_dev.data(),
                        w.norm.std_dev.size() * sizeof(double)),
            0);
}

TEST(WeightFile, LoadedModelPredictsLikeSource) {
  ModelConfig c;
  ModelWeights w = build_model(c, 20);
  Rng rng(21);
  randomize_stats(w, rng);
  fs::path path = temp_dir() / "m.weights";
  save_weights(w, path.string());
  ModelWeights w2 = load_weights(path.string());

  RealMat feats = random_features(c, rng);
  std::vector<double> raw = random_raw(c, rng);
  MaskPrediction a = predict_masks(w, feats, raw);
  MaskPrediction b = predict_masks(w2, feats, raw);
  for (std::size_t i = 0; i < a.clean_mask_frame.size(); ++i) {
    // weights pass through f32 once; predictions agree to that precision
    EXPECT_NEAR(a.clean_mask_frame[i], b.clean_mask_frame[i], 1e-5);
    EXPECT_NEAR(a.noise_mask_frame[i], b.noise_mask_frame[i], 1e-5);
  }
}

TEST(WeightFile, TruncatedFileRejectedEverywhere) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.mlp_hidden = {24};
  ModelWeights w = build_model(c, 22);
  fs::path dir = temp_dir();
  fs::path full = dir / "full.weights";
  save_weights(w, full.string());
  const std::string bytes = read_file(full);
  ASSERT_GT(bytes.size(), 64u);

  const std::size_t cuts[] = {0,  4,  8,  11, 40, 60, bytes.size() / 2,
                              bytes.size() - 9, bytes.size() - 1};
  for (std::size_t cut : cuts) {
    fs::path partial = dir / ("cut_" + std::to_string(cut) + ".weights");
    write_file(partial, bytes.substr(0, cut));
    EXPECT_THROW(load_weights(partial.string()), FormatError) << "cut at " << cut;
  }
}

TEST(WeightFile, BadMagicAndVersionRejected) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.mlp_hidden = {24};
  ModelWeights w = build_model(c, 23);
  fs::path dir = temp_dir();
  fs::path path = dir / "m.weights";
  save_weights(w, path.string());
  std::string bytes = read_file(path);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  fs::path magic_path = dir / "magic.weights";
  write_file(magic_path, bad_magic);
  EXPECT_THROW(load_weights(magic_path.string()), FormatError);

  std::string bad_version = bytes;
  bad_version[8] = 99;
  fs::path version_path = dir / "version.weights";
  write_file(version_path, bad_version);
  EXPECT_THROW(load_weights(version_path.string()), FormatError);
}

TEST(WeightFile, InvalidHeaderConfigRejectedBeforeTensorReads) {
  ModelConfig bad;
  bad.d_model = 8;
  bad.n_heads = 3;  // does not divide
  std::string bytes(kWeightMagic, sizeof kWeightMagic);
  detail::put_u32le(bytes, kWeightFormatVersion);
  detail::append_config(bytes, bad);
  // no tensor section at all: rejection must happen from the header alone
  fs::path path = temp_dir() / "badconfig.weights";
  write_file(path, bytes);
  try {
    load_weights(path.string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid config"), std::string::npos);
  }
}

TEST(WeightFile, WrongTensorShapeNamesOffender) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.mlp_hidden = {24};
  ModelWeights w = build_model(c, 24);
  std::string bytes(kWeightMagic, sizeof kWeightMagic);
  detail::put_u32le(bytes, kWeightFormatVersion);
  detail::append_config(bytes, c);
  detail::put_u32le(bytes, static_cast<std::uint32_t>(w.store.count() + 2));
  Tensor wrong;
  wrong.shape = {1, 1};
  wrong.values = {0.0};
  append_named_tensor(bytes, "input_proj.w", wrong);
  fs::path path = temp_dir() / "shape.weights";
  write_file(path, bytes);
  try {
    load_weights(path.string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("input_proj.w"), std::string::npos);
  }
}

TEST(WeightFile, UnknownTensorNameRejected) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.mlp_hidden = {24};
  ModelWeights w = build_model(c, 25);
  std::string bytes(kWeightMagic, sizeof kWeightMagic);
  detail::put_u32le(bytes, kWeightFormatVersion);
  detail::append_config(bytes, c);
  detail::put_u32le(bytes, static_cast<std::uint32_t>(w.store.count() + 2));
  Tensor t = Tensor::from_mat(RealMat(2, 2, 1.0));
  append_named_tensor(bytes, "not_a_layer", t);
  fs::path path = temp_dir() / "unknown.weights";
  write_file(path, bytes);
  try {
    load_weights(path.string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("not_a_layer"), std::string::npos);
  }
}

TEST(WeightFile, NonPositiveNormalizationStdRejected) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.mlp_hidden = {24};
  ModelWeights w = build_model(c, 26);
  w.norm.std_dev[3] = 0.0;
  fs::path path = temp_dir() / "badstd.weights";
  save_weights(w, path.string());
  EXPECT_THROW(load_weights(path.string()), FormatError);
}

TEST(WeightFile, MissingFileThrowsIoError) {
  EXPECT_THROW(load_weights("/nonexistent/dir/m.weights"), IoError);
}

}  // namespace
}  // namespace clarity
