// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "dpinpaint/common.hpp"

namespace dpinpaint::fft {

using Complex = std::complex<double>;

namespace detail {

enum class Kind { r2c, c2r, forward, backward };

// The FFTW planner is not reentrant; plans are created once per
// (kind, size) under a lock and executed afterwards through the new-array
// interface, which is thread-safe. Plans live until process exit.
inline fftw_plan plan_for(Kind kind, int n) {
  static std::mutex mutex;
  static std::map<std::pair<Kind, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(kind, n);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::vector<double> real(static_cast<std::size_t>(n) + 2);
  std::vector<Complex> cplx(static_cast<std::size_t>(n) + 1);
  auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
  fftw_plan p = nullptr;
  switch (kind) {
    case Kind::r2c:
      p = fftw_plan_dft_r2c_1d(n, real.data(), c, flags);
      break;
    case Kind::c2r:
      p = fftw_plan_dft_c2r_1d(n, c, real.data(), flags);
      break;
    case Kind::forward:
      p = fftw_plan_dft_1d(n, c, c, FFTW_FORWARD, flags);
      break;
    case Kind::backward:
      p = fftw_plan_dft_1d(n, c, c, FFTW_BACKWARD, flags);
      break;
  }
  if (p == nullptr) throw NumericalError("fftw: planner failed");
  cache.emplace(key, p);
  return p;
}

}  // namespace detail

/// Unnormalized real-to-half-complex DFT; returns n/2 + 1 bins.
inline std::vector<Complex> rfft(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.begin(), x.end());
  std::vector<Complex> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_execute_dft_r2c(detail::plan_for(detail::Kind::r2c, n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

/// Unnormalized half-complex-to-real inverse DFT of length n.
/// Imaginary parts of the DC and Nyquist bins are ignored.
inline std::vector<double> irfft_unnormalized(std::span<const Complex> spec,
                                              std::size_t n) {
  require(spec.size() == n / 2 + 1, "irfft: spectrum length mismatch");
  std::vector<Complex> in(spec.begin(), spec.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(
      detail::plan_for(detail::Kind::c2r, static_cast<int>(n)),
      reinterpret_cast<fftw_complex*>(in.data()), out.data());
  return out;
}

/// Inverse of rfft (includes the 1/n factor).
inline std::vector<double> irfft(std::span<const Complex> spec, std::size_t n) {
  auto out = irfft_unnormalized(spec, n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

/// In-place unnormalized complex DFT, exp(-2 pi i nk/N) kernel.
inline void forward(std::span<Complex> data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(
      detail::plan_for(detail::Kind::forward, static_cast<int>(data.size())),
      p, p);
}

/// In-place unnormalized complex DFT, exp(+2 pi i nk/N) kernel.
inline void backward(std::span<Complex> data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(
      detail::plan_for(detail::Kind::backward, static_cast<int>(data.size())),
      p, p);
}

}  // namespace dpinpaint::fft
