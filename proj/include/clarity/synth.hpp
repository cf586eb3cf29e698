#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"
#include "clarity/dsp.hpp"
#include "clarity/rng.hpp"
#include "clarity/wav.hpp"

namespace clarity {

namespace detail {

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m <= 0.0) return;
  const double g = peak / m;
  for (double& v : x) v *= g;
}

}  // namespace detail

// Voice surrogate: drifting harmonic stack under two formant-like resonances,
// syllable-rate amplitude modulation, a little breath noise.
inline AudioSignal synth_speech(double seconds, int rate, std::uint64_t seed) {
  if (seconds <= 0.0 || rate <= 0) throw std::invalid_argument("synth_speech: bad duration/rate");
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(seconds * rate);
  const double f0_base = 110.0 + 110.0 * rng.uniform();
  const double vibrato_rate = 3.0 + 3.0 * rng.uniform();
  const double drift_depth = 0.04 + 0.06 * rng.uniform();
  const double syllable_rate = 2.0 + 2.0 * rng.uniform();
  const double syllable_phase = 2.0 * kPi * rng.uniform();
  const double formant1 = 400.0 + 300.0 * rng.uniform();
  const double formant2 = 1200.0 + 800.0 * rng.uniform();

  const double top = std::min(3500.0, 0.45 * rate);
  const int n_harmonics = static_cast<int>(top / f0_base);
  std::vector<double> phases(static_cast<std::size_t>(n_harmonics) + 1);
  for (auto& p : phases) p = 2.0 * kPi * rng.uniform();

  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f0 = f0_base * (1.0 + drift_depth * std::sin(2.0 * kPi * vibrato_rate * t));
    double s = 0.0;
    for (int h = 1; h <= n_harmonics; ++h) {
      const double f = f0 * h;
      if (f > top) break;
      phases[static_cast<std::size_t>(h)] += 2.0 * kPi * f / rate;
      const double b1 = std::exp(-0.5 * std::pow((f - formant1) / 150.0, 2.0));
      const double b2 = std::exp(-0.5 * std::pow((f - formant2) / 250.0, 2.0));
      const double amp = (1.0 / h) * (0.3 + 2.0 * b1 + 1.2 * b2);
      s += amp * std::sin(phases[static_cast<std::size_t>(h)]);
    }
    const double envelope =
        0.08 + 0.92 * std::pow(std::abs(std::sin(kPi * syllable_rate * t + syllable_phase)), 1.5);
    x[i] = envelope * s + 0.005 * rng.normal();
  }
  detail::normalize_peak(x, 0.5);
  return AudioSignal(std::move(x), rate);
}

enum class NoiseKind { white, chirp, impulse_train };

inline const char* noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::white: return "white";
    case NoiseKind::chirp: return "chirp";
    case NoiseKind::impulse_train: return "impulse_train";
  }
  return "unknown";
}

inline AudioSignal synth_noise(NoiseKind kind, double seconds, int rate, std::uint64_t seed) {
  if (seconds <= 0.0 || rate <= 0) throw std::invalid_argument("synth_noise: bad duration/rate");
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(seconds * rate);
  std::vector<double> x(n, 0.0);
  switch (kind) {
    case NoiseKind::white: {
      for (double& v : x) v = rng.normal();
      break;
    }
    case NoiseKind::chirp: {
      const double f_lo = 80.0 + 120.0 * rng.uniform();
      const double f_hi = std::min(3800.0, 0.475 * rate);
      double phase = 2.0 * kPi * rng.uniform();
      for (std::size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n);
        const double f = f_lo + (f_hi - f_lo) * frac;
        phase += 2.0 * kPi * f / rate;
        x[i] = std::sin(phase);
      }
      break;
    }
    case NoiseKind::impulse_train: {
      const std::size_t period = 300 + rng.below(600);
      const double decay = 0.96 + 0.03 * rng.uniform();
      double y = 0.0;
      std::size_t next = rng.below(period);
      for (std::size_t i = 0; i < n; ++i) {
        y *= decay;
        if (i == next) {
          y += rng.uniform() < 0.5 ? -1.0 : 1.0;
          next += period;
        }
        x[i] = y;
      }
      break;
    }
  }
  detail::normalize_peak(x, 0.5);
  return AudioSignal(std::move(x), rate);
}

struct SynthCorpus {
  std::vector<std::string> clean_paths;
  std::vector<std::string> noise_paths;
  std::string manifest_path;
};

// Writes WAVs plus a manifest pairing each clean clip with a noise clip,
// cycling SNR through {-3, 0, 3, 10} dB.
inline SynthCorpus write_synth_corpus(const std::string& dir, std::size_t n_clean,
                                      std::size_t n_noise, double seconds,
                                      std::uint64_t base_seed,
                                      int rate = kPipelineSampleRate) {
  if (n_clean == 0 || n_noise == 0) {
    throw std::invalid_argument("write_synth_corpus: need at least one clip of each kind");
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

  SynthCorpus corpus;
  const NoiseKind kinds[] = {NoiseKind::white, NoiseKind::chirp, NoiseKind::impulse_train};
  const double snrs[] = {-3.0, 0.0, 3.0, 10.0};

  for (std::size_t i = 0; i < n_clean; ++i) {
    const std::string path = (fs::path(dir) / ("clean_" + std::to_string(i) + ".wav")).string();
    write_wav(path, synth_speech(seconds, rate, base_seed + i));
    corpus.clean_paths.push_back(path);
  }
  for (std::size_t i = 0; i < n_noise; ++i) {
    const NoiseKind kind = kinds[i % 3];
    const std::string path =
        (fs::path(dir) / ("noise_" + std::to_string(i) + "_" + noise_kind_name(kind) + ".wav"))
            .string();
    write_wav(path, synth_noise(kind, seconds, rate, base_seed + 1000 + i));
    corpus.noise_paths.push_back(path);
  }

  corpus.manifest_path = (fs::path(dir) / "manifest.tsv").string();
  std::ofstream manifest(corpus.manifest_path, std::ios::trunc);
  if (!manifest) throw IoError("cannot create " + corpus.manifest_path);
  manifest << "# clean\tnoise\tsnr_db\tseed\n";
  for (std::size_t i = 0; i < n_clean; ++i) {
    manifest << corpus.clean_paths[i] << '\t' << corpus.noise_paths[i % n_noise] << '\t'
             << snrs[i % 4] << '\t' << base_seed + 2000 + i << '\n';
  }
  if (!manifest) throw IoError("write failed for " + corpus.manifest_path);
  return corpus;
}

}  // namespace clarity
