#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "clarity/common.hpp"

namespace clarity {

// Iterative radix-2 FFT with precomputed twiddles and bit-reversal table.
// A plan is built once per transform size; transform() itself does not
// allocate, which the streaming path relies on.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (!is_power_of_two(n)) {
      throw std::invalid_argument("FftPlan: size must be a power of two, got " +
                                  std::to_string(n));
    }
    bitrev_.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < log2n; ++b) {
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
      }
      bitrev_[i] = r;
    }
    // Twiddles for the forward transform: w_m^k = exp(-2*pi*i*k/m).
    twiddle_.resize(n / 2);
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t k = 0; k < n / 2; ++k) {
      double a = -two_pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
  }

  std::size_t size() const { return n_; }

  // In-place DIT transform. inverse=true conjugates the twiddles and scales
  // by 1/n at the end.
  void transform(std::complex<double>* x, bool inverse) const {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = bitrev_[i];
      if (j > i) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len >> 1;
      const std::size_t step = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          std::complex<double> w = twiddle_[k * step];
          if (inverse) w = std::conj(w);
          std::complex<double> u = x[start + k];
          std::complex<double> t = w * x[start + k + half];
          x[start + k] = u + t;
          x[start + k + half] = u - t;
        }
      }
    }
    if (inverse) {
      const double scale = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) x[i] *= scale;
    }
  }

  void forward(std::complex<double>* x) const { transform(x, false); }
  void inverse(std::complex<double>* x) const { transform(x, true); }

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddle_;
};

}  // namespace clarity
