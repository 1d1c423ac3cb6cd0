// Shared helpers for the test binaries.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "dpinpaint/common.hpp"
#include "dpinpaint/rng.hpp"

namespace testing {

using dpinpaint::Waveform;

inline Waveform randn(dpinpaint::Rng& rng, std::size_t n, double scale = 1.0) {
  Waveform x(n);
  rng.fill_normal(x);
  for (double& v : x) v *= scale;
  return x;
}

inline double rel_err(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ref[i]) * (a[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return std::sqrt(num / den);
}

// Naive O(N^2) real DFT, bins 0..N/2. Independent of FFTW.
inline std::vector<std::complex<double>> naive_rdft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>((k * t) % n) / n;
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Dense symmetric circulant from half-spectrum eigenvalues, by cosine sums.
inline Eigen::MatrixXd dense_circulant(std::span<const double> lambda_half, std::size_t n) {
  std::vector<double> row(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t kk = k <= n / 2 ? k : n - k;
      acc += lambda_half[kk] * std::cos(2.0 * M_PI * static_cast<double>((k * d) % n) / n);
    }
    row[d] = acc / n;
  }
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = row[(i + n - j) % n];
  return m;
}

inline Waveform sine(std::size_t n, double freq, double fs, double amp = 1.0, double phase = 0.0) {
  Waveform x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * M_PI * freq * i / fs + phase);
  return x;
}

}  // namespace testing
