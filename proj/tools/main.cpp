// clarity: command-line front end for the noise-suppression pipeline.
// Exit codes: 0 success, 1 internal/data error, 2 bad input.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "clarity/data.hpp"
#include "clarity/denoise.hpp"
#include "clarity/metrics.hpp"
#include "clarity/model.hpp"
#include "clarity/resample.hpp"
#include "clarity/streaming.hpp"
#include "clarity/synth.hpp"
#include "clarity/train.hpp"
#include "clarity/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace clarity;

namespace {

// ---- shared plumbing ----

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_parent_dir(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

// Resolved-flag snapshot, replayable via --config. Keys are written as
// `<subcommand>.<flag>` so the top-level config reader routes them back to the
// right subcommand.
void write_run_snapshot(const CLI::App& cmd, const fs::path& path) {
  std::istringstream dump(cmd.config_to_str(true, false));
  std::ostringstream out;
  out << "# clarity " << cmd.get_name() << "\n";
  for (std::string line; std::getline(dump, line);) {
    if (!line.empty()) out << cmd.get_name() << '.' << line << '\n';
  }
  write_text(path, out.str());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

AudioSignal load_signal_8k(const std::string& path) {
  AudioSignal sig = read_wav(path);
  if (sig.sample_rate != kPipelineSampleRate) {
    warn("%s: %d Hz input, resampling to %d Hz", path.c_str(), sig.sample_rate,
         kPipelineSampleRate);
    sig = resample(sig, kPipelineSampleRate);
  }
  return sig;
}

void write_matrix_tsv(const fs::path& path, const RealMat& m) {
  std::ostringstream out;
  out << std::setprecision(10);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << m(r, c);
    }
    out << '\n';
  }
  write_text(path, out.str());
}

std::string snr_tag(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  std::string tag(buf);
  for (char& c : tag) {
    if (c == '-') c = 'm';
    if (c == '.') c = 'p';
  }
  return tag;
}

// ---- model-config flags (commands that can't read the config from a weight file) ----

struct ModelFlags {
  ModelConfig cfg;
  std::string mlp_csv;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--frames", f.cfg.context_frames, "context frames per prediction");
  cmd->add_option("--frame-length", f.cfg.frame_length, "analysis frame length in samples");
  cmd->add_option("--hop", f.cfg.hop, "analysis hop in samples");
  cmd->add_option("--d-model", f.cfg.d_model, "token width");
  cmd->add_option("--layers", f.cfg.n_layers, "attention layers");
  cmd->add_option("--heads", f.cfg.n_heads, "attention heads");
  cmd->add_option("--mlp", f.mlp_csv, "MLP hidden sizes, comma separated");
  cmd->add_option("--dropout", f.cfg.dropout_rate, "MLP dropout rate");
  cmd->add_option("--exponent-L", f.cfg.exponent_L, "mask exponent parameter L");
  cmd->add_option("--smooth-sigma", f.cfg.smoothing.sigma, "mask smoothing sigma, frames");
  cmd->add_option("--smooth-radius", f.cfg.smoothing.truncation_radius,
                  "mask smoothing kernel radius, frames");
}

ModelConfig resolve_model_flags(ModelFlags& f) {
  if (!f.mlp_csv.empty()) {
    f.cfg.mlp_hidden.clear();
    std::stringstream ss(f.mlp_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        f.cfg.mlp_hidden.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw std::invalid_argument("--mlp: bad hidden size '" + item + "'");
      }
    }
  }
  f.cfg.n_bins = f.cfg.frame_length / 2 + 1;
  f.cfg.validate();
  return f.cfg;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::size_t n_clean = 8, n_noise = 3;
  double seconds = 2.0;
  std::uint64_t seed = 1;
  int rate = kPipelineSampleRate;
};

void run_synth(const CLI::App& cmd, const SynthArgs& a) {
  SynthCorpus corpus = write_synth_corpus(a.out, a.n_clean, a.n_noise, a.seconds, a.seed, a.rate);
  write_run_snapshot(cmd, fs::path(a.out) / "run.cfg");
  std::printf("synth: %zu clean + %zu noise clips, manifest %s\n", corpus.clean_paths.size(),
              corpus.noise_paths.size(), corpus.manifest_path.c_str());
}

// ---- mix ----

struct MixArgs {
  std::string manifest, out;
  std::vector<double> snrs = {-3.0, 0.0, 3.0, 10.0};
};

void run_mix(const CLI::App& cmd, const MixArgs& a) {
  const std::vector<ManifestEntry> entries = parse_manifest(a.manifest);
  if (entries.empty()) throw FormatError(a.manifest + ": no usable manifest lines");
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create directory " + a.out + ": " + ec.message());

  std::size_t written = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ManifestEntry& e = entries[i];
    AudioSignal clean = load_signal_8k(e.clean_path);
    AudioSignal noise = load_signal_8k(e.noise_path);
    for (std::size_t si = 0; si < a.snrs.size(); ++si) {
      const double snr = a.snrs[si];
      const std::uint64_t seed = e.seed * 1000 + si;
      // same alignment draw make_mixture uses, so the recorded gain is exact
      Rng rng(seed);
      AudioSignal aligned(detail::fit_noise_to_length(noise.samples, clean.size(), rng),
                          clean.sample_rate);
      const double gain = compute_noise_gain(clean, aligned, snr);
      MixtureTriple triple = make_mixture(clean, noise, snr, seed);

      const std::string stem = "mix_" + std::to_string(i) + "_snr" + snr_tag(snr);
      const fs::path mix_path = fs::path(a.out) / (stem + ".wav");
      const fs::path clean_path = fs::path(a.out) / (stem + ".clean.wav");
      const fs::path noise_path = fs::path(a.out) / (stem + ".noise.wav");
      write_wav(mix_path.string(), triple.mix);
      write_wav(clean_path.string(), triple.clean);
      write_wav(noise_path.string(), triple.scaled_noise);

      json side;
      side["clean_src"] = e.clean_path;
      side["noise_src"] = e.noise_path;
      side["snr_db"] = snr;
      side["seed"] = seed;
      side["gain"] = gain;
      side["mix_wav"] = mix_path.string();
      side["clean_wav"] = clean_path.string();
      side["noise_wav"] = noise_path.string();
      write_json(fs::path(a.out) / (stem + ".json"), side);
      ++written;
    }
  }
  write_run_snapshot(cmd, fs::path(a.out) / "run.cfg");
  std::printf("mix: %zu mixtures (%zu utterances x %zu SNRs) in %s\n", written, entries.size(),
              a.snrs.size(), a.out.c_str());
}

// ---- dataset ----

struct DatasetArgs {
  std::string manifest, out;
  double val_frac = 0.2;
  std::size_t stride = 1;
  std::uint64_t seed = 1;
  ModelFlags model;
};

void run_dataset(const CLI::App& cmd, DatasetArgs& a) {
  if (a.val_frac < 0.0 || a.val_frac >= 1.0) {
    throw std::invalid_argument("--val-frac must be in [0, 1)");
  }
  if (a.stride == 0) throw std::invalid_argument("--stride must be >= 1");
  const ModelConfig config = resolve_model_flags(a.model);
  const std::vector<ManifestEntry> entries = parse_manifest(a.manifest);
  if (entries.empty()) throw FormatError(a.manifest + ": no usable manifest lines");

  std::vector<std::string> ids(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) ids[i] = std::to_string(i);
  DatasetSplit split = split_dataset(ids, {1.0 - a.val_frac, a.val_frac, 0.0}, a.seed);

  auto collect = [&](const std::vector<std::string>& members) {
    std::vector<TrainingExample> pool;
    for (const std::string& id : members) {
      const ManifestEntry& e = entries[std::stoul(id)];
      MixtureTriple triple = make_mixture(MixtureSpec{e.clean_path, e.noise_path, e.snr_db,
                                                      e.seed});
      // the chain analyzes band-filtered audio, so examples come from the same view
      triple.clean = voice_band_filter(triple.clean);
      triple.scaled_noise = voice_band_filter(triple.scaled_noise);
      triple.mix = voice_band_filter(triple.mix);
      std::vector<TrainingExample> examples = generate_examples(triple, config);
      for (std::size_t k = 0; k < examples.size(); k += a.stride) {
        pool.push_back(std::move(examples[k]));
      }
    }
    return pool;
  };

  const std::vector<TrainingExample> train = collect(split.train);
  const std::vector<TrainingExample> val = collect(split.validation);
  if (train.size() < 2) throw DataError("dataset: fewer than 2 training examples");

  ensure_parent_dir(a.out + "_train.bin");
  save_examples(a.out + "_train", train);
  if (!val.empty()) save_examples(a.out + "_val", val);
  write_run_snapshot(cmd, a.out + ".run.cfg");
  std::printf("dataset: %zu train / %zu val examples from %zu utterances -> %s_{train,val}\n",
              train.size(), val.size(), entries.size(), a.out.c_str());
}

// ---- train ----

struct TrainArgs {
  std::string data, out, val, loss_csv;
  TrainOptions opt;
  std::uint64_t init_seed = 1;
  ModelFlags model;
};

void run_train(const CLI::App& cmd, TrainArgs& a) {
  ModelConfig config = resolve_model_flags(a.model);
  const std::vector<TrainingExample> train = load_examples(a.data + "_train");
  std::vector<TrainingExample> val;
  const std::string val_prefix = a.val.empty() ? a.data + "_val" : a.val;
  if (fs::exists(val_prefix + ".json")) val = load_examples(val_prefix);

  const TrainingExample& first = train.front();
  if (first.log_features.rows() != config.context_frames ||
      first.log_features.cols() != config.n_bins ||
      first.raw_feature.size() != config.frame_length) {
    throw std::invalid_argument(
        "train: dataset shape (T=" + std::to_string(first.log_features.rows()) +
        ", bins=" + std::to_string(first.log_features.cols()) +
        ", frame=" + std::to_string(first.raw_feature.size()) +
        ") does not match the model configuration");
  }

  ModelWeights w = build_model(config, a.init_seed);
  w.norm = fit_normalization(train);
  TrainResult result = train_model(w, train, val, a.opt);

  ensure_parent_dir(a.out);
  save_weights(w, a.out);
  const std::string csv = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  write_loss_csv(csv, result.history);
  write_run_snapshot(cmd, a.out + ".run.cfg");

  const double final_train = result.history.empty() ? 0.0 : result.history.back().train_loss;
  std::printf("train: %zu epochs, final train loss %.6g, best val %.6g at epoch %zu -> %s\n",
              result.epochs_run, final_train, result.best_val_loss, result.best_epoch,
              a.out.c_str());
  if (result.diverged) {
    throw DataError("training diverged; last good checkpoint saved to " + a.out);
  }
}

// ---- denoise / denoise-oracle ----

struct DenoiseArgs {
  std::string in, model, out;
  bool streaming = false;
  bool causal = false;
};

void run_denoise(const CLI::App& cmd, const DenoiseArgs& a) {
  ModelWeights w = load_weights(a.model);
  AudioSignal sig = load_signal_8k(a.in);
  AudioSignal enhanced;
  if (a.streaming) {
    enhanced = stream_denoise_signal(sig, w);
  } else {
    DenoiseOptions opts;
    opts.causal_smoothing = a.causal;
    enhanced = denoise_signal(sig, w, opts);
  }
  ensure_parent_dir(a.out);
  write_wav(a.out, enhanced);
  write_run_snapshot(cmd, a.out + ".run.cfg");
  std::printf("denoise%s: %s -> %s (%zu samples)\n", a.streaming ? " (streaming)" : "",
              a.in.c_str(), a.out.c_str(), enhanced.samples.size());
}

struct OracleArgs {
  std::string mix, clean, noise, out;
  ModelFlags model;
};

void run_denoise_oracle(const CLI::App& cmd, OracleArgs& a) {
  const ModelConfig config = resolve_model_flags(a.model);
  MixtureTriple triple;
  triple.mix = load_signal_8k(a.mix);
  triple.clean = load_signal_8k(a.clean);
  triple.scaled_noise = load_signal_8k(a.noise);
  if (triple.clean.size() != triple.mix.size() ||
      triple.scaled_noise.size() != triple.mix.size()) {
    throw std::invalid_argument("denoise-oracle: mix/clean/noise lengths differ (" +
                                std::to_string(triple.mix.size()) + "/" +
                                std::to_string(triple.clean.size()) + "/" +
                                std::to_string(triple.scaled_noise.size()) + ")");
  }
  AudioSignal enhanced = denoise_oracle(triple, config);
  ensure_parent_dir(a.out);
  write_wav(a.out, enhanced);
  write_run_snapshot(cmd, a.out + ".run.cfg");
  std::printf("denoise-oracle: %s -> %s (%zu samples)\n", a.mix.c_str(), a.out.c_str(),
              enhanced.samples.size());
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string pairs, out, summary;
};

struct PairLine {
  std::string clean, enhanced, condition;
};

std::vector<PairLine> parse_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<PairLine> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected clean<TAB>enhanced[<TAB>condition]");
    }
    pairs.push_back({fields[0], fields[1], fields.size() == 3 ? fields[2] : "all"});
  }
  if (in.bad()) throw IoError("read failed for " + path);
  return pairs;
}

void run_evaluate(const CLI::App& cmd, const EvaluateArgs& a) {
  const std::vector<PairLine> pairs = parse_pairs(a.pairs);
  if (pairs.empty()) throw FormatError(a.pairs + ": no pairs to evaluate");

  struct Accum {
    std::size_t n = 0;
    double seg = 0, llr = 0, stoi = 0, sisdr = 0;
  };
  std::map<std::string, Accum> by_condition;

  std::ostringstream csv;
  csv << std::setprecision(10);
  csv << "clean,enhanced,condition,seg_snr_db,llr,stoi,si_sdr_db\n";
  for (const PairLine& p : pairs) {
    AudioSignal clean = read_wav(p.clean);
    AudioSignal enhanced = read_wav(p.enhanced);
    if (enhanced.sample_rate != clean.sample_rate) {
      warn("%s: rate %d != %d, resampling", p.enhanced.c_str(), enhanced.sample_rate,
           clean.sample_rate);
      enhanced = resample(enhanced, clean.sample_rate);
    }
    const MetricReport r = evaluate_pair(clean, enhanced);
    csv << p.clean << ',' << p.enhanced << ',' << p.condition << ',' << r.seg_snr_db << ','
        << r.llr << ',' << r.stoi << ',' << r.si_sdr_db << '\n';
    Accum& acc = by_condition[p.condition];
    ++acc.n;
    acc.seg += r.seg_snr_db;
    acc.llr += r.llr;
    acc.stoi += r.stoi;
    acc.sisdr += r.si_sdr_db;
  }
  ensure_parent_dir(a.out);
  write_text(a.out, csv.str());

  json summary = json::array();
  std::printf("%-24s %5s %10s %8s %7s %10s\n", "condition", "n", "segsnr_db", "llr", "stoi",
              "si_sdr_db");
  for (const auto& [name, acc] : by_condition) {
    const double n = static_cast<double>(acc.n);
    json row;
    row["condition"] = name;
    row["count"] = acc.n;
    row["seg_snr_db"] = acc.seg / n;
    row["llr"] = acc.llr / n;
    row["stoi"] = acc.stoi / n;
    row["si_sdr_db"] = acc.sisdr / n;
    summary.push_back(row);
    std::printf("%-24s %5zu %10.3f %8.3f %7.4f %10.3f\n", name.c_str(), acc.n, acc.seg / n,
                acc.llr / n, acc.stoi / n, acc.sisdr / n);
  }
  const std::string summary_path =
      a.summary.empty() ? fs::path(a.out).replace_extension(".summary.json").string() : a.summary;
  write_json(summary_path, summary);
  write_run_snapshot(cmd, a.out + ".run.cfg");
  std::printf("evaluate: %zu pairs -> %s, summary -> %s\n", pairs.size(), a.out.c_str(),
              summary_path.c_str());
}

// ---- profile ----

struct ProfileArgs {
  std::string model, in, out;
};

void run_profile(const CLI::App& cmd, const ProfileArgs& a) {
  ModelWeights w = load_weights(a.model);
  AudioSignal sig = load_signal_8k(a.in);
  const LatencyReport rep = profile_stream(w, sig);

  auto print_row = [](const char* name, const StageStats& s) {
    std::printf("%-12s %9.3f %9.3f %9.3f %9.3f\n", name, s.mean_ms, s.median_ms, s.p95_ms,
                s.p99_ms);
  };
  std::printf("%zu frames, %.1f ms frame period\n", rep.frames, rep.frame_period_ms);
  std::printf("%-12s %9s %9s %9s %9s\n", "stage", "mean_ms", "median", "p95", "p99");
  print_row("pre", rep.pre);
  print_row("inference", rep.inference);
  print_row("post", rep.post);
  print_row("total", rep.total);
  const double budget_ms = 1000.0 * w.config.frame_length / kPipelineSampleRate;
  std::printf("real-time budget %.1f ms/frame: %s\n", budget_ms,
              rep.total.mean_ms < budget_ms ? "met" : "MISSED");

  if (!a.out.empty()) {
    auto stage_json = [](const StageStats& s) {
      json j;
      j["mean_ms"] = s.mean_ms;
      j["median_ms"] = s.median_ms;
      j["p95_ms"] = s.p95_ms;
      j["p99_ms"] = s.p99_ms;
      return j;
    };
    json j;
    j["frames"] = rep.frames;
    j["frame_period_ms"] = rep.frame_period_ms;
    j["pre"] = stage_json(rep.pre);
    j["inference"] = stage_json(rep.inference);
    j["post"] = stage_json(rep.post);
    j["total"] = stage_json(rep.total);
    ensure_parent_dir(a.out);
    write_json(a.out, j);
    write_run_snapshot(cmd, a.out + ".run.cfg");
  }
}

// ---- plot-data ----

struct PlotArgs {
  std::string model, mix, clean, noise, out;
};

RealMat magnitude_matrix(const Spectrogram& spec) {
  RealMat m(spec.n_frames(), spec.n_bins());
  for (std::size_t t = 0; t < spec.n_frames(); ++t) {
    for (std::size_t b = 0; b < spec.n_bins(); ++b) m(t, b) = std::abs(spec.bins(t, b));
  }
  return m;
}

void run_plot_data(const CLI::App& cmd, const PlotArgs& a) {
  if (a.clean.empty() != a.noise.empty()) {
    throw std::invalid_argument("plot-data: --clean and --noise must be given together");
  }
  ModelWeights w = load_weights(a.model);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create directory " + a.out + ": " + ec.message());

  const FrameGrid grid = w.config.grid();
  AudioSignal mix_f = voice_band_filter(load_signal_8k(a.mix));
  Spectrogram spec_mix = stft(mix_f, grid);
  write_matrix_tsv(fs::path(a.out) / "mix_magnitude.tsv", magnitude_matrix(spec_mix));

  MaskPair predicted = predict_mask_frames(w, spec_mix, mix_f.samples);
  write_matrix_tsv(fs::path(a.out) / "predicted_clean_mask.tsv", predicted.clean_mask);
  write_matrix_tsv(fs::path(a.out) / "predicted_noise_mask.tsv", predicted.noise_mask);

  if (!a.clean.empty()) {
    AudioSignal clean_f = voice_band_filter(load_signal_8k(a.clean));
    AudioSignal noise_f = voice_band_filter(load_signal_8k(a.noise));
    Spectrogram spec_clean = stft(clean_f, grid);
    Spectrogram spec_noise = stft(noise_f, grid);
    if (spec_clean.n_frames() != spec_mix.n_frames() ||
        spec_noise.n_frames() != spec_mix.n_frames()) {
      throw std::invalid_argument("plot-data: clean/noise lengths do not match the mixture");
    }
    MaskPair ideal = ideal_masks(spec_clean, spec_noise, spec_mix);
    write_matrix_tsv(fs::path(a.out) / "clean_magnitude.tsv", magnitude_matrix(spec_clean));
    write_matrix_tsv(fs::path(a.out) / "ideal_clean_mask.tsv", ideal.clean_mask);
    write_matrix_tsv(fs::path(a.out) / "ideal_noise_mask.tsv", ideal.noise_mask);
  }
  write_run_snapshot(cmd, fs::path(a.out) / "run.cfg");
  std::printf("plot-data: %zu x %zu matrices -> %s\n", spec_mix.n_frames(), spec_mix.n_bins(),
              a.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformer noise-suppression pipeline"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();  // keeps run.cfg snapshots replayable
  // Config files are only read at the top level, so --config lives here and the
  // subcommands fall through to it.
  app.set_config("--config", "", "run snapshot to replay (flags still override)");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic speech/noise corpus");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--clean", synth_args.n_clean, "clean clips");
  synth->add_option("--noise", synth_args.n_noise, "noise clips");
  synth->add_option("--seconds", synth_args.seconds, "clip length");
  synth->add_option("--seed", synth_args.seed, "base seed");
  synth->add_option("--rate", synth_args.rate, "sample rate");
  synth->callback([&] { run_synth(*synth, synth_args); });

  MixArgs mix_args;
  CLI::App* mix = app.add_subcommand("mix", "render mixtures from a manifest");
  mix->add_option("--manifest", mix_args.manifest, "clean/noise manifest (TSV)")->required();
  mix->add_option("--out", mix_args.out, "output directory")->required();
  mix->add_option("--snr", mix_args.snrs, "SNR list in dB")->delimiter(',');
  mix->callback([&] { run_mix(*mix, mix_args); });

  DatasetArgs dataset_args;
  CLI::App* dataset = app.add_subcommand("dataset", "build a training example cache");
  dataset->add_option("--manifest", dataset_args.manifest, "mixture manifest (TSV)")->required();
  dataset->add_option("--out", dataset_args.out, "output prefix")->required();
  dataset->add_option("--val-frac", dataset_args.val_frac, "validation fraction of utterances");
  dataset->add_option("--stride", dataset_args.stride, "keep every Nth example");
  dataset->add_option("--seed", dataset_args.seed, "split seed");
  add_model_flags(dataset, dataset_args.model);
  dataset->callback([&] { run_dataset(*dataset, dataset_args); });

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model on a cached dataset");
  train->add_option("--data", train_args.data, "dataset prefix from `dataset`")->required();
  train->add_option("--out", train_args.out, "output weight file")->required();
  train->add_option("--val", train_args.val, "validation dataset prefix");
  train->add_option("--loss-csv", train_args.loss_csv, "loss curve path");
  train->add_option("--epochs", train_args.opt.max_epochs, "epoch cap");
  train->add_option("--batch", train_args.opt.batch_size, "minibatch size");
  train->add_option("--patience", train_args.opt.patience, "early-stop patience");
  train->add_option("--target-loss", train_args.opt.target_loss, "stop at this train loss");
  train->add_option("--lr", train_args.opt.adam.lr, "ADAM learning rate");
  train->add_option("--seed", train_args.opt.seed, "shuffle/dropout seed");
  train->add_option("--init-seed", train_args.init_seed, "weight init seed");
  add_model_flags(train, train_args.model);
  train->callback([&] { run_train(*train, train_args); });

  DenoiseArgs denoise_args;
  CLI::App* denoise = app.add_subcommand("denoise", "enhance a WAV with a trained model");
  denoise->add_option("--in", denoise_args.in, "noisy input WAV")->required();
  denoise->add_option("--model", denoise_args.model, "weight file")->required();
  denoise->add_option("--out", denoise_args.out, "enhanced output WAV")->required();
  denoise->add_flag("--streaming", denoise_args.streaming, "frame-by-frame runtime path");
  denoise->add_flag("--causal", denoise_args.causal, "causal mask smoothing in batch mode");
  denoise->callback([&] { run_denoise(*denoise, denoise_args); });

  OracleArgs oracle_args;
  CLI::App* oracle = app.add_subcommand("denoise-oracle", "apply ideal masks (no model)");
  oracle->add_option("--mix", oracle_args.mix, "mixture WAV")->required();
  oracle->add_option("--clean", oracle_args.clean, "clean reference WAV")->required();
  oracle->add_option("--noise", oracle_args.noise, "scaled noise WAV")->required();
  oracle->add_option("--out", oracle_args.out, "enhanced output WAV")->required();
  add_model_flags(oracle, oracle_args.model);
  oracle->callback([&] { run_denoise_oracle(*oracle, oracle_args); });

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score clean/enhanced pairs");
  evaluate->add_option("--pairs", eval_args.pairs, "pair manifest (TSV)")->required();
  evaluate->add_option("--out", eval_args.out, "per-pair CSV")->required();
  evaluate->add_option("--summary", eval_args.summary, "per-condition JSON summary");
  evaluate->callback([&] { run_evaluate(*evaluate, eval_args); });

  ProfileArgs profile_args;
  CLI::App* profile = app.add_subcommand("profile", "per-stage streaming latency report");
  profile->add_option("--model", profile_args.model, "weight file")->required();
  profile->add_option("--in", profile_args.in, "input WAV")->required();
  profile->add_option("--out", profile_args.out, "JSON report path");
  profile->callback([&] { run_profile(*profile, profile_args); });

  PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("plot-data", "dump spectrogram/mask matrices as TSV");
  plot->add_option("--model", plot_args.model, "weight file")->required();
  plot->add_option("--mix", plot_args.mix, "mixture WAV")->required();
  plot->add_option("--clean", plot_args.clean, "clean reference WAV (for ideal masks)");
  plot->add_option("--noise", plot_args.noise, "scaled noise WAV (for ideal masks)");
  plot->add_option("--out", plot_args.out, "output directory")->required();
  plot->callback([&] { run_plot_data(*plot, plot_args); });

  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
