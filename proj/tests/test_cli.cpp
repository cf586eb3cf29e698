#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "clarity/filters.hpp"
#include "clarity/metrics.hpp"
#include "clarity/wav.hpp"

using namespace clarity;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Tiny geometry shared by every model-touching command below.
const std::string kModelFlags =
    "--frames 3 --frame-length 16 --hop 8 --d-model 8 --layers 1 --heads 2 --mlp 12";

struct RunResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_root() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / "clarity_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  static int call = 0;
  const fs::path out = scratch_root() / ("stdout" + std::to_string(call) + ".txt");
  const fs::path err = scratch_root() / ("stderr" + std::to_string(call) + ".txt");
  ++call;
  const std::string cmd = std::string(CLARITY_CLI_PATH) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

// One shared pipeline run (corpus -> mixtures -> dataset -> model); the tests
// below assert on different stages of it.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root = scratch_root() / "pipeline";
    fs::create_directories(root);
    const std::string corpus = (root / "corpus").string();
    const std::string mixes = (root / "mixes").string();

    RunResult r = run_cli("synth --out " + corpus + " --clean 2 --noise 2 --seconds 1.5 --seed 7");
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli("mix --manifest " + corpus + "/manifest.tsv --out " + mixes + " --snr 0,10");
    ASSERT_EQ(r.code, 0) << r.err;

    std::ofstream man(root / "dataset.tsv");
    man << mixes << "/mix_0_snr0.wav\t" << mixes << "/mix_0_snr0.clean.wav\t0\t1\n"
        << mixes << "/mix_1_snr0.wav\t" << mixes << "/mix_1_snr0.clean.wav\t0\t2\n";
    man.close();
    r = run_cli("dataset --manifest " + (root / "dataset.tsv").string() + " --out " +
                (root / "ds/cache").string() + " --stride 8 " + kModelFlags);
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli("train --data " + (root / "ds/cache").string() + " --out " +
                (root / "model.bin").string() + " --epochs 8 --lr 3e-3 " + kModelFlags);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path root;
};

fs::path CliPipeline::root;

TEST_F(CliPipeline, StagesLeaveExpectedFiles) {
  EXPECT_TRUE(fs::exists(root / "corpus/clean_0.wav"));
  EXPECT_TRUE(fs::exists(root / "corpus/manifest.tsv"));
  EXPECT_TRUE(fs::exists(root / "mixes/mix_1_snr10.wav"));
  EXPECT_TRUE(fs::exists(root / "ds/cache_train.bin"));
  EXPECT_TRUE(fs::exists(root / "ds/cache_train.json"));
  EXPECT_TRUE(fs::exists(root / "model.bin"));
  EXPECT_TRUE(fs::exists(root / "model.bin.loss.csv"));
  EXPECT_TRUE(fs::exists(root / "model.bin.run.cfg"));

  // Mixture sidecar records sources and the exact gain applied.
  const json side = json::parse(slurp(root / "mixes/mix_0_snr0.json"));
  EXPECT_EQ(side["snr_db"], 0.0);
  EXPECT_TRUE(side.contains("gain"));
  EXPECT_GT(side["gain"].get<double>(), 0.0);

  const json ds = json::parse(slurp(root / "ds/cache_train.json"));
  EXPECT_GT(ds["count"].get<int>(), 0);
  EXPECT_EQ(ds["context_frames"], 3);
  EXPECT_EQ(ds["n_bins"], 9);
  EXPECT_EQ(ds["frame_length"], 16);
}

TEST_F(CliPipeline, StreamingMatchesBatchCausal) {
  const std::string in = (root / "mixes/mix_0_snr0.wav").string();
  RunResult r = run_cli("denoise --in " + in + " --model " + (root / "model.bin").string() +
                        " --out " + (root / "enh_batch.wav").string() + " --causal");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli("denoise --in " + in + " --model " + (root / "model.bin").string() + " --out " +
              (root / "enh_stream.wav").string() + " --streaming");
  ASSERT_EQ(r.code, 0) << r.err;

  EXPECT_EQ(slurp(root / "enh_batch.wav"), slurp(root / "enh_stream.wav"));
  const AudioSignal noisy = read_wav(in);
  const AudioSignal enhanced = read_wav((root / "enh_stream.wav").string());
  EXPECT_EQ(enhanced.samples.size(), noisy.samples.size());
}

TEST_F(CliPipeline, ConfigReplayReproducesModel) {
  RunResult r = run_cli("train --config " + (root / "model.bin.run.cfg").string() + " --out " +
                        (root / "replay.bin").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(root / "model.bin"), slurp(root / "replay.bin"));
}

TEST_F(CliPipeline, OracleImprovesMixture) {
  const std::string stem = (root / "mixes/mix_0_snr0").string();
  RunResult r = run_cli("denoise-oracle --mix " + stem + ".wav --clean " + stem +
                        ".clean.wav --noise " + stem + ".noise.wav --out " +
                        (root / "oracle.wav").string() + " " + kModelFlags);
  ASSERT_EQ(r.code, 0) << r.err;

  const AudioSignal clean_f = voice_band_filter(read_wav(stem + ".clean.wav"));
  const AudioSignal mix_f = voice_band_filter(read_wav(stem + ".wav"));
  const AudioSignal enhanced = read_wav((root / "oracle.wav").string());
  EXPECT_GT(seg_snr(clean_f, enhanced), seg_snr(clean_f, mix_f) + 1.0);
}

TEST_F(CliPipeline, EvaluateIdentityPairHitsCeilings) {
  const std::string clean = (root / "corpus/clean_0.wav").string();
  std::ofstream pairs(root / "pairs.tsv");
  pairs << clean << '\t' << clean << "\tidentity\n";
  pairs.close();

  RunResult r = run_cli("evaluate --pairs " + (root / "pairs.tsv").string() + " --out " +
                        (root / "scores.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;

  std::istringstream csv(slurp(root / "scores.csv"));
  std::string header, line;
  ASSERT_TRUE(std::getline(csv, header));
  ASSERT_TRUE(std::getline(csv, line));
  const std::vector<std::string> f = split(line, ',');
  ASSERT_EQ(f.size(), 7u);
  EXPECT_EQ(f[2], "identity");
  EXPECT_DOUBLE_EQ(std::stod(f[3]), 35.0);   // per-frame clamp ceiling
  EXPECT_NEAR(std::stod(f[5]), 1.0, 1e-9);   // stoi
  EXPECT_DOUBLE_EQ(std::stod(f[6]), 100.0);  // si_sdr clamp ceiling

  const json summary = json::parse(slurp(root / "scores.summary.json"));
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0]["condition"], "identity");
  EXPECT_EQ(summary[0]["count"], 1);
}

TEST_F(CliPipeline, ProfileReportsFrameBudget) {
  RunResult r = run_cli("profile --model " + (root / "model.bin").string() + " --in " +
                        (root / "mixes/mix_0_snr0.wav").string() + " --out " +
                        (root / "profile.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ms/frame"), std::string::npos);

  const json report = json::parse(slurp(root / "profile.json"));
  EXPECT_GT(report["frames"].get<int>(), 0);
  EXPECT_TRUE(report.contains("total"));
}

TEST_F(CliPipeline, PlotDataWritesAllSixMatrices) {
  const std::string stem = (root / "mixes/mix_0_snr0").string();
  RunResult r = run_cli("plot-data --model " + (root / "model.bin").string() + " --mix " + stem +
                        ".wav --clean " + stem + ".clean.wav --noise " + stem + ".noise.wav" +
                        " --out " + (root / "plot").string());
  ASSERT_EQ(r.code, 0) << r.err;

  for (const char* name : {"mix_magnitude.tsv", "predicted_clean_mask.tsv",
                           "predicted_noise_mask.tsv", "clean_magnitude.tsv",
                           "ideal_clean_mask.tsv", "ideal_noise_mask.tsv"}) {
    SCOPED_TRACE(name);
    ASSERT_TRUE(fs::exists(root / "plot" / name));
    std::istringstream tsv(slurp(root / "plot" / name));
    std::string first;
    ASSERT_TRUE(std::getline(tsv, first));
    EXPECT_EQ(split(first, '\t').size(), 9u);  // one column per bin
  }
}

TEST_F(CliPipeline, ShapeMismatchIsAUsageError) {
  RunResult r = run_cli("train --data " + (root / "ds/cache").string() + " --out " +
                        (root / "bad.bin").string());  // default geometry, cache is 3x9x16
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("does not match"), std::string::npos);
}

TEST(CliErrors, MissingInputFileIsExitTwoWithPath) {
  const fs::path dir = scratch_root() / "errors";
  fs::create_directories(dir);
  std::ofstream man(dir / "bad.tsv");
  man << dir.string() << "/absent_clean.wav\t" << dir.string() << "/absent_noise.wav\t0\t1\n";
  man.close();

  RunResult r = run_cli("mix --manifest " + (dir / "bad.tsv").string() + " --out " +
                        (dir / "out").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("absent_clean.wav"), std::string::npos);
}

TEST(CliErrors, MissingSubcommandIsExitTwo) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("--no-such-flag").code, 2);
}

TEST(CliErrors, MissingModelFileIsExitTwo) {
  const fs::path dir = scratch_root() / "errors";
  fs::create_directories(dir);
  RunResult r = run_cli("denoise --in nowhere.wav --model nowhere.bin --out " +
                        (dir / "x.wav").string());
  EXPECT_EQ(r.code, 2);
}

TEST(CliDeterminism, SynthRerunIsBitIdentical) {
  const fs::path a = scratch_root() / "det_a";
  const fs::path b = scratch_root() / "det_b";
  ASSERT_EQ(run_cli("synth --out " + a.string() + " --clean 1 --noise 1 --seconds 1 --seed 5").code,
            0);
  ASSERT_EQ(run_cli("synth --out " + b.string() + " --clean 1 --noise 1 --seconds 1 --seed 5").code,
            0);
  EXPECT_EQ(slurp(a / "clean_0.wav"), slurp(b / "clean_0.wav"));
  EXPECT_EQ(slurp(a / "noise_0_white.wav"), slurp(b / "noise_0_white.wav"));
}

}  // namespace
