#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"
#include "clarity/config.hpp"
#include "clarity/dsp.hpp"
#include "clarity/masks.hpp"
#include "clarity/resample.hpp"
#include "clarity/rng.hpp"
#include "clarity/wav.hpp"

namespace clarity {

struct MixtureSpec {
  std::string clean_path;
  std::string noise_path;
  double target_snr_db = 0.0;
  std::uint64_t seed = 0;
};

// G such that SNR(clean, G * noise) hits the target, full-signal RMS basis.
inline double compute_noise_gain(const AudioSignal& clean, const AudioSignal& noise,
                                 double target_snr_db) {
  if (!std::isfinite(target_snr_db)) {
    throw std::invalid_argument("compute_noise_gain: SNR must be finite");
  }
  const double rms_clean = rms(clean);
  const double rms_noise = rms(noise);
  if (rms_clean <= 0.0) throw DataError("compute_noise_gain: clean signal has zero RMS");
  if (rms_noise <= 0.0) throw DataError("compute_noise_gain: noise signal has zero RMS");
  return rms_clean / rms_noise * std::pow(10.0, -target_snr_db / 20.0);
}

struct MixtureTriple {
  AudioSignal mix;
  AudioSignal clean;
  AudioSignal scaled_noise;
};

namespace detail {

// Loop or trim noise to exactly n samples; start offset drawn from rng.
inline std::vector<double> fit_noise_to_length(const std::vector<double>& noise,
                                               std::size_t n, Rng& rng) {
  if (noise.empty()) throw DataError("make_mixture: empty noise signal");
  if (noise.size() == n) return noise;
  std::vector<double> out(n);
  if (noise.size() > n) {
    const std::size_t offset = rng.below(noise.size() - n + 1);
    std::copy(noise.begin() + offset, noise.begin() + offset + n, out.begin());
  } else {
    const std::size_t offset = rng.below(noise.size());
    for (std::size_t i = 0; i < n; ++i) out[i] = noise[(offset + i) % noise.size()];
  }
  return out;
}

}  // namespace detail

// In-memory mixing of same-rate signals.
inline MixtureTriple make_mixture(const AudioSignal& clean, const AudioSignal& noise,
                                  double target_snr_db, std::uint64_t seed) {
  if (clean.sample_rate != noise.sample_rate) {
    throw std::invalid_argument("make_mixture: sample rates differ");
  }
  if (clean.size() < kDefaultFrameLengthSamples) {
    throw DataError("make_mixture: clean signal shorter than one segment");
  }
  Rng rng(seed);
  AudioSignal aligned(detail::fit_noise_to_length(noise.samples, clean.size(), rng),
                      clean.sample_rate);
  const double gain = compute_noise_gain(clean, aligned, target_snr_db);

  MixtureTriple triple{AudioSignal(std::vector<double>(clean.size()), clean.sample_rate),
                       clean,
                       AudioSignal(std::vector<double>(clean.size()), clean.sample_rate)};
  for (std::size_t i = 0; i < clean.size(); ++i) {
    triple.scaled_noise.samples[i] = gain * aligned.samples[i];
    triple.mix.samples[i] = clean.samples[i] + triple.scaled_noise.samples[i];
    // re-derive so mix - clean - scaled_noise is bitwise zero
    triple.scaled_noise.samples[i] = triple.mix.samples[i] - clean.samples[i];
  }
  return triple;
}

inline MixtureTriple make_mixture(const MixtureSpec& spec) {
  AudioSignal clean = resample(read_wav(spec.clean_path), kPipelineSampleRate);
  AudioSignal noise = resample(read_wav(spec.noise_path), kPipelineSampleRate);
  return make_mixture(clean, noise, spec.target_snr_db, spec.seed);
}

struct TrainingExample {
  RealMat log_features;              // T x n_bins, unnormalized log power
  std::vector<double> raw_feature;   // frame_length
  std::vector<double> clean_target;  // n_bins, ideal clean mask of newest frame
  std::vector<double> noise_target;  // n_bins, ideal noise mask of newest frame
};

// Pull-based example source: slides a causal T-frame window over a mixture
// triple in 1-frame steps, emitting features plus ideal-mask targets for the
// newest frame. Expects band-filtered inputs. All-silent mixture frames are
// skipped.
class ExampleStream {
 public:
  ExampleStream(const MixtureTriple& triple, const ModelConfig& config)
      : config_(config), mix_samples_(triple.mix.samples) {
    config_.validate();
    const FrameGrid grid = config_.grid();
    Spectrogram spec_clean = stft(triple.clean, grid);
    Spectrogram spec_noise = stft(triple.scaled_noise, grid);
    Spectrogram spec_mix = stft(triple.mix, grid);
    if (spec_mix.n_frames() < config_.context_frames) {
      throw DataError("ExampleStream: " + std::to_string(spec_mix.n_frames()) +
                      " frames < context of " + std::to_string(config_.context_frames));
    }
    masks_ = ideal_masks(spec_clean, spec_noise, spec_mix);
    log_power_ = log_power_features(spec_mix);
    silent_.resize(spec_mix.n_frames());
    for (std::size_t t = 0; t < spec_mix.n_frames(); ++t) {
      bool silent = true;
      for (std::size_t m = 0; m < spec_mix.n_bins(); ++m) {
        if (std::abs(spec_mix.bins(t, m)) > kLogFloor) {
          silent = false;
          break;
        }
      }
      silent_[t] = silent;
    }
    t_ = config_.context_frames - 1;
  }

  bool next(TrainingExample& out) {
    const std::size_t T = config_.context_frames;
    const std::size_t bins = config_.n_bins;
    while (t_ < log_power_.rows()) {
      const std::size_t t = t_++;
      if (silent_[t]) {
        ++skipped_;
        continue;
      }
      out.log_features = RealMat(T, bins);
      for (std::size_t i = 0; i < T; ++i) {
        const double* src = log_power_.row_ptr(t + 1 - T + i);
        std::copy(src, src + bins, out.log_features.row_ptr(i));
      }
      out.raw_feature = context_raw_mean(mix_samples_, t, config_.grid(), T);
      out.clean_target.assign(masks_.clean_mask.row_ptr(t), masks_.clean_mask.row_ptr(t) + bins);
      out.noise_target.assign(masks_.noise_mask.row_ptr(t), masks_.noise_mask.row_ptr(t) + bins);
      return true;
    }
    return false;
  }

  std::size_t skipped() const { return skipped_; }

 private:
  ModelConfig config_;
  std::vector<double> mix_samples_;
  RealMat log_power_;
  MaskPair masks_;
  std::vector<char> silent_;
  std::size_t t_ = 0;
  std::size_t skipped_ = 0;
};

inline std::vector<TrainingExample> generate_examples(const MixtureTriple& triple,
                                                      const ModelConfig& config) {
  ExampleStream stream(triple, config);
  std::vector<TrainingExample> out;
  TrainingExample ex;
  while (stream.next(ex)) out.push_back(ex);
  return out;
}

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

// Welford reduction over the newest frame of each example, one value per bin.
class NormalizationAccumulator {
 public:
  void add(const TrainingExample& ex) {
    const std::size_t bins = ex.log_features.cols();
    const double* newest = ex.log_features.row_ptr(ex.log_features.rows() - 1);
    if (count_ == 0) {
      mean_.assign(bins, 0.0);
      m2_.assign(bins, 0.0);
    } else if (bins != mean_.size()) {
      throw std::invalid_argument("fit_normalization: inconsistent bin counts");
    }
    ++count_;
    for (std::size_t m = 0; m < bins; ++m) {
      const double delta = newest[m] - mean_[m];
      mean_[m] += delta / static_cast<double>(count_);
      m2_[m] += delta * (newest[m] - mean_[m]);
    }
  }

  std::size_t count() const { return count_; }

  NormalizationStats finalize() const {
    if (count_ < 2) throw DataError("fit_normalization: need at least 2 examples");
    NormalizationStats stats;
    stats.mean = mean_;
    stats.std_dev.resize(mean_.size());
    for (std::size_t m = 0; m < mean_.size(); ++m) {
      const double var = m2_[m] / static_cast<double>(count_ - 1);
      stats.std_dev[m] = std::max(std::sqrt(var), kNormalizationStdFloor);
    }
    return stats;
  }

  static constexpr double kNormalizationStdFloor = 1e-6;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

inline NormalizationStats fit_normalization(const std::vector<TrainingExample>& examples) {
  NormalizationAccumulator acc;
  for (const auto& ex : examples) acc.add(ex);
  return acc.finalize();
}

inline void normalize_features(RealMat& features, const NormalizationStats& stats) {
  if (features.cols() != stats.mean.size()) {
    throw std::invalid_argument("normalize_features: bin count mismatch");
  }
  for (std::size_t r = 0; r < features.rows(); ++r) {
    double* row = features.row_ptr(r);
    for (std::size_t m = 0; m < features.cols(); ++m) {
      row[m] = (row[m] - stats.mean[m]) / stats.std_dev[m];
    }
  }
}

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Deterministic shuffled partition at utterance granularity.
inline DatasetSplit split_dataset(std::vector<std::string> utterance_ids,
                                  const std::array<double, 3>& fractions,
                                  std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw std::invalid_argument("split_dataset: negative fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split_dataset: fractions must sum to 1");
  }
  std::size_t nonzero = 0;
  for (double f : fractions) nonzero += f > 0.0 ? 1 : 0;
  if (utterance_ids.size() < nonzero) {
    throw DataError("split_dataset: fewer utterances than partitions");
  }

  const std::size_t n = utterance_ids.size();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * fractions[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  while (assigned < n) {  // largest fractional remainder first, earlier index on ties
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best] + 1e-12) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  Rng rng(seed);
  rng.shuffle(utterance_ids);
  DatasetSplit split;
  auto it = utterance_ids.begin();
  split.train.assign(it, it + counts[0]);
  it += counts[0];
  split.validation.assign(it, it + counts[1]);
  it += counts[1];
  split.test.assign(it, it + counts[2]);
  return split;
}

struct ManifestEntry {
  std::string clean_path;
  std::string noise_path;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

// One utterance per line: clean-path <TAB> noise-path <TAB> SNR <TAB> seed.
// Blank lines and lines starting with '#' are skipped.
inline std::vector<ManifestEntry> parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ManifestEntry> entries;
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
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() != 4) {
      throw FormatError(where + ": expected 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    ManifestEntry entry;
    entry.clean_path = fields[0];
    entry.noise_path = fields[1];
    try {
      std::size_t used = 0;
      entry.snr_db = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw FormatError(where + ": bad SNR value '" + fields[2] + "'");
    }
    try {
      std::size_t used = 0;
      entry.seed = std::stoull(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw FormatError(where + ": bad seed value '" + fields[3] + "'");
    }
    entries.push_back(std::move(entry));
  }
  if (in.bad()) throw IoError("read failed for " + path);
  return entries;
}

namespace detail {

inline void put_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_f64le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

// Minimal extractor for the flat sidecar schema written below.
inline std::uint64_t json_uint_field(const std::string& text, const std::string& key,
                                     const std::string& path) {
  const std::string needle = "\"" + key + "\"";
  std::size_t pos = text.find(needle);
  if (pos == std::string::npos) throw FormatError(path + ": missing field " + key);
  pos = text.find(':', pos + needle.size());
  if (pos == std::string::npos) throw FormatError(path + ": malformed field " + key);
  ++pos;
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  std::size_t end = pos;
  while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
  if (end == pos) throw FormatError(path + ": non-numeric field " + key);
  return std::stoull(text.substr(pos, end - pos));
}

}  // namespace detail

// Example cache: <prefix>.bin holds little-endian float64 records, and
// <prefix>.json records the shapes needed to read them back.
inline void save_examples(const std::string& prefix,
                          const std::vector<TrainingExample>& examples) {
  if (examples.empty()) throw DataError("save_examples: nothing to save");
  const std::size_t T = examples.front().log_features.rows();
  const std::size_t bins = examples.front().log_features.cols();
  const std::size_t frame_length = examples.front().raw_feature.size();

  std::string blob;
  blob.reserve(examples.size() * (T * bins + frame_length + 2 * bins) * 8);
  for (const auto& ex : examples) {
    if (ex.log_features.rows() != T || ex.log_features.cols() != bins ||
        ex.raw_feature.size() != frame_length || ex.clean_target.size() != bins ||
        ex.noise_target.size() != bins) {
      throw std::invalid_argument("save_examples: inconsistent example shapes");
    }
    for (double v : ex.log_features.data()) detail::put_f64le(blob, v);
    for (double v : ex.raw_feature) detail::put_f64le(blob, v);
    for (double v : ex.clean_target) detail::put_f64le(blob, v);
    for (double v : ex.noise_target) detail::put_f64le(blob, v);
  }

  std::ofstream bin(prefix + ".bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot create " + prefix + ".bin");
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw IoError("write failed for " + prefix + ".bin");

  std::ostringstream side;
  side << "{\"count\": " << examples.size() << ", \"context_frames\": " << T
       << ", \"n_bins\": " << bins << ", \"frame_length\": " << frame_length << "}\n";
  std::ofstream json(prefix + ".json", std::ios::trunc);
  if (!json) throw IoError("cannot create " + prefix + ".json");
  json << side.str();
  if (!json) throw IoError("write failed for " + prefix + ".json");
}

inline std::vector<TrainingExample> load_examples(const std::string& prefix) {
  std::ifstream json(prefix + ".json");
  if (!json) throw IoError("cannot open " + prefix + ".json");
  std::string side{std::istreambuf_iterator<char>(json), std::istreambuf_iterator<char>()};
  const std::uint64_t count = detail::json_uint_field(side, "count", prefix + ".json");
  const std::uint64_t T = detail::json_uint_field(side, "context_frames", prefix + ".json");
  const std::uint64_t bins = detail::json_uint_field(side, "n_bins", prefix + ".json");
  const std::uint64_t frame_length =
      detail::json_uint_field(side, "frame_length", prefix + ".json");

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + prefix + ".bin");
  std::vector<unsigned char> blob{std::istreambuf_iterator<char>(bin),
                                  std::istreambuf_iterator<char>()};
  const std::size_t record = (T * bins + frame_length + 2 * bins) * 8;
  if (blob.size() != count * record) {
    throw FormatError(prefix + ".bin: expected " + std::to_string(count * record) +
                      " bytes, found " + std::to_string(blob.size()));
  }

  std::vector<TrainingExample> examples(count);
  const unsigned char* p = blob.data();
  for (auto& ex : examples) {
    ex.log_features = RealMat(T, bins);
    for (double& v : ex.log_features.data()) v = detail::read_f64le(p), p += 8;
    ex.raw_feature.resize(frame_length);
    for (double& v : ex.raw_feature) v = detail::read_f64le(p), p += 8;
    ex.clean_target.resize(bins);
    for (double& v : ex.clean_target) v = detail::read_f64le(p), p += 8;
    ex.noise_target.resize(bins);
    for (double& v : ex.noise_target) v = detail::read_f64le(p), p += 8;
  }
  return examples;
}

}  // namespace clarity
