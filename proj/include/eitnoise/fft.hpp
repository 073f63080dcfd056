#pragma once

// Minimal iterative radix-2 FFT for the Welch estimator.  Segment lengths in
// this project are powers of two by construction, so nothing fancier is
// needed.

#include <complex>
#include <stdexcept>
#include <vector>

#include "eitnoise/model.hpp"

namespace eitnoise {

/// In-place forward DFT, X_m = sum_k x_k exp(-2 pi i m k / N); N a power of 2.
inline void fft_forward(std::vector<std::complex<double>>& x) {
  const size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: length must be a power of 2");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / double(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace eitnoise
