#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"

namespace clarity {

// One second-order section, direct form II transposed. a0 is normalized
// to 1 at design time.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double z1 = 0.0, z2 = 0.0;

  double process(double x) {
    double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }

  void reset() { z1 = z2 = 0.0; }
};

namespace detail {

struct Zpk {
  std::vector<std::complex<double>> zeros;
  std::vector<std::complex<double>> poles;
  double gain = 1.0;
};

inline Zpk butterworth_prototype(int order) {
  Zpk out;
  out.gain = 1.0;
  const double pi = 3.14159265358979323846264338328;
  for (int k = 0; k < order; ++k) {
    double theta = pi * (2.0 * k + 1.0) / (2.0 * order) + pi / 2.0;
    out.poles.push_back({std::cos(theta), std::sin(theta)});
  }
  return out;
}

inline Zpk lowpass_to_highpass(const Zpk& lp, double wc) {
  Zpk out;
  std::complex<double> num(1.0, 0.0), den(1.0, 0.0);
  for (const auto& z : lp.zeros) num *= -z;
  for (const auto& p : lp.poles) den *= -p;
  for (const auto& z : lp.zeros) out.zeros.push_back(wc / z);
  for (const auto& p : lp.poles) out.poles.push_back(wc / p);
  // Degree difference becomes zeros at s = 0.
  for (std::size_t i = lp.zeros.size(); i < lp.poles.size(); ++i) {
    out.zeros.push_back({0.0, 0.0});
  }
  out.gain = lp.gain * (num / den).real();
  return out;
}

inline Zpk lowpass_to_bandpass(const Zpk& lp, double w1, double w2) {
  Zpk out;
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);
  auto transform = [&](const std::complex<double>& s) {
    std::complex<double> half = s * (bw / 2.0);
    std::complex<double> disc = std::sqrt(half * half - w0 * w0);
    return std::pair{half + disc, half - disc};
  };
  for (const auto& z : lp.zeros) {
    auto [a, b] = transform(z);
    out.zeros.push_back(a);
    out.zeros.push_back(b);
  }
  for (const auto& p : lp.poles) {
    auto [a, b] = transform(p);
    out.poles.push_back(a);
    out.poles.push_back(b);
  }
  const std::size_t degree = lp.poles.size() - lp.zeros.size();
  for (std::size_t i = 0; i < degree; ++i) out.zeros.push_back({0.0, 0.0});
  out.gain = lp.gain * std::pow(bw, static_cast<double>(degree));
  return out;
}

inline Zpk bilinear(const Zpk& analog, double fs) {
  Zpk out;
  const double fs2 = 2.0 * fs;
  std::complex<double> num(1.0, 0.0), den(1.0, 0.0);
  for (const auto& z : analog.zeros) num *= fs2 - z;
  for (const auto& p : analog.poles) den *= fs2 - p;
  for (const auto& z : analog.zeros) out.zeros.push_back((fs2 + z) / (fs2 - z));
  for (const auto& p : analog.poles) out.poles.push_back((fs2 + p) / (fs2 - p));
  // Analog zeros at infinity land at z = -1.
  for (std::size_t i = analog.zeros.size(); i < analog.poles.size(); ++i) {
    out.zeros.push_back({-1.0, 0.0});
  }
  out.gain = analog.gain * (num / den).real();
  return out;
}

// Pair conjugate roots (real roots pair among themselves) so each pair
// yields real quadratic coefficients.
inline std::vector<std::pair<std::complex<double>, std::complex<double>>>
pair_roots(std::vector<std::complex<double>> roots) {
  const double tol = 1e-9;
  std::vector<std::pair<std::complex<double>, std::complex<double>>> pairs;
  std::vector<std::complex<double>> reals;
  std::vector<std::complex<double>> upper;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) < tol) {
      reals.push_back(r);
    } else if (r.imag() > 0) {
      upper.push_back(r);
    }
  }
  std::sort(upper.begin(), upper.end(), [](const auto& a, const auto& b) {
    return std::abs(a) < std::abs(b);
  });
  std::sort(reals.begin(), reals.end(), [](const auto& a, const auto& b) {
    return a.real() < b.real();
  });
  for (const auto& r : upper) pairs.emplace_back(r, std::conj(r));
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    pairs.emplace_back(reals[i], reals[i + 1]);
  }
  if (reals.size() % 2 != 0) {
    throw std::invalid_argument("filter design: odd number of real roots, even order expected");
  }
  return pairs;
}

}  // namespace detail

// Cascade of biquads realizing an even-order IIR filter designed from a
// digital zero/pole/gain set.
class BiquadCascade {
 public:
  BiquadCascade() = default;

  explicit BiquadCascade(const detail::Zpk& digital) {
    if (digital.poles.size() != digital.zeros.size() ||
        digital.poles.size() % 2 != 0) {
      throw std::invalid_argument("BiquadCascade: even matched zero/pole count expected");
    }
    auto pole_pairs = detail::pair_roots(digital.poles);
    auto zero_pairs = detail::pair_roots(digital.zeros);
    for (std::size_t i = 0; i < pole_pairs.size(); ++i) {
      const auto& [p1, p2] = pole_pairs[i];
      const auto& [q1, q2] = zero_pairs[i];
      Biquad s;
      s.b0 = 1.0;
      s.b1 = -(q1 + q2).real();
      s.b2 = (q1 * q2).real();
      s.a1 = -(p1 + p2).real();
      s.a2 = (p1 * p2).real();
      sections_.push_back(s);
    }
    if (!sections_.empty()) {
      sections_.front().b0 *= digital.gain;
      sections_.front().b1 *= digital.gain;
      sections_.front().b2 *= digital.gain;
    }
  }

  double process(double x) {
    for (auto& s : sections_) x = s.process(x);
    return x;
  }

  void process(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = process(in[i]);
  }

  void reset() {
    for (auto& s : sections_) s.reset();
  }

  std::size_t n_sections() const { return sections_.size(); }

  // H(e^{j 2 pi f / fs}); used by tests to measure the realized response.
  std::complex<double> frequency_response(double freq_hz, double fs) const {
    const double w = 6.283185307179586476925286766559 * freq_hz / fs;
    const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -w));
    std::complex<double> h(1.0, 0.0);
    for (const auto& s : sections_) {
      std::complex<double> num = s.b0 + s.b1 * zinv + s.b2 * zinv * zinv;
      std::complex<double> den = 1.0 + s.a1 * zinv + s.a2 * zinv * zinv;
      h *= num / den;
    }
    return h;
  }

 private:
  std::vector<Biquad> sections_;
};

inline double prewarp(double freq_hz, double fs) {
  const double pi = 3.14159265358979323846264338328;
  return 2.0 * fs * std::tan(pi * freq_hz / fs);
}

inline BiquadCascade butterworth_highpass(int order, double cutoff_hz, double fs) {
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("butterworth_highpass: even order >= 2 required");
  }
  if (cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0) {
    throw std::invalid_argument("butterworth_highpass: cutoff out of (0, Nyquist)");
  }
  auto proto = detail::butterworth_prototype(order);
  auto hp = detail::lowpass_to_highpass(proto, prewarp(cutoff_hz, fs));
  return BiquadCascade(detail::bilinear(hp, fs));
}

inline BiquadCascade butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("butterworth_lowpass: even order >= 2 required");
  }
  if (cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0) {
    throw std::invalid_argument("butterworth_lowpass: cutoff out of (0, Nyquist)");
  }
  auto proto = detail::butterworth_prototype(order);
  // LP prototype rescaled to wc: poles scale by wc, gain by wc^order.
  auto wc = prewarp(cutoff_hz, fs);
  detail::Zpk lp;
  for (const auto& p : proto.poles) lp.poles.push_back(p * wc);
  lp.gain = proto.gain * std::pow(wc, static_cast<double>(proto.poles.size()));
  return BiquadCascade(detail::bilinear(lp, fs));
}

// The pipeline's band gate (the same design backs the input and output
// filters). At fs = 8 kHz the nominal 4 kHz upper edge sits on Nyquist,
// where a bandpass design degenerates, so the filter falls back to a
// high-pass at the lower edge; a zero lower edge falls back to a low-pass.
inline BiquadCascade design_band_filter(double low_hz, double high_hz, double fs,
                                        int order = 4) {
  if (low_hz < 0.0 || low_hz >= high_hz) {
    throw std::invalid_argument("band filter: need 0 <= low < high, got [" +
                                std::to_string(low_hz) + ", " +
                                std::to_string(high_hz) + ")");
  }
  const double nyquist = fs / 2.0;
  if (low_hz >= nyquist) {
    throw std::invalid_argument("band filter: low edge at or above Nyquist");
  }
  const bool high_open = high_hz >= nyquist;
  if (low_hz == 0.0 && high_open) {
    throw std::invalid_argument("band filter: both edges degenerate, nothing to design");
  }
  if (high_open) return butterworth_highpass(order, low_hz, fs);
  if (low_hz == 0.0) return butterworth_lowpass(order, high_hz, fs);
  // True bandpass: order counts the final transfer order, so the prototype
  // uses order/2.
  auto proto = detail::butterworth_prototype(order / 2);
  auto bp = detail::lowpass_to_bandpass(proto, prewarp(low_hz, fs), prewarp(high_hz, fs));
  return BiquadCascade(detail::bilinear(bp, fs));
}

constexpr double kVoiceBandLowHz = 40.0;
constexpr double kVoiceBandHighHz = 4000.0;

// Causal forward filtering; output has identical length and rate.
inline AudioSignal bandpass_filter(const AudioSignal& signal, double low_hz,
                                   double high_hz) {
  signal.check_finite("bandpass_filter");
  BiquadCascade cascade = design_band_filter(low_hz, high_hz, signal.sample_rate);
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(signal.samples.size());
  cascade.process(signal.samples.data(), out.samples.data(), signal.samples.size());
  return out;
}

inline AudioSignal voice_band_filter(const AudioSignal& signal) {
  return bandpass_filter(signal, kVoiceBandLowHz, kVoiceBandHighHz);
}

}  // namespace clarity
