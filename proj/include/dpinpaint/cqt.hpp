// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Invertible constant-Q transform built from octave-wise non-stationary
// Gabor sub-transforms.
//
// The filters are Hann windows on a log-frequency axis: filter k rises from
// the center of filter k-1 and falls to the center of filter k+1, so
// neighbours cross at -6 dB. Each octave shares one frame rate, and the hop
// halves from one octave to the next one up. Every filter's frequency support
// fits inside its octave's IDFT length (the painless case), which makes the
// frame operator diagonal in the DFT domain and the canonical dual a per-bin
// division.
//
// Frequencies below the lowest filter (including DC) and the sliver just
// under Nyquist where the top window vanishes are outside the frame's span.
// forward() followed by inverse() therefore equals dc_notch(), the
// projection onto the covered band.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dpinpaint/common.hpp"
#include "dpinpaint/fft.hpp"

namespace dpinpaint {

using Complex = std::complex<double>;

struct CqtParams {
  double sample_rate = 44100.0;
  int bins_per_octave = 64;
  int num_octaves = 8;
  // <= 0 selects sample_rate / 2^(num_octaves + 1), which puts the upper edge
  // of the top filter at Nyquist.
  double f_min = 0.0;
  std::size_t signal_length = 0;

  double lowest_center() const {
    return f_min > 0.0 ? f_min
                       : sample_rate / std::ldexp(1.0, num_octaves + 1);
  }

  int num_bins() const { return bins_per_octave * num_octaves; }

  // Width in Hz of the widest filter (the top one).
  double top_support_hz() const {
    return lowest_center() * std::ldexp(1.0, num_octaves) *
           (1.0 - std::exp2(-2.0 / bins_per_octave));
  }

  /// Smallest hop of the top octave that keeps every filter painless.
  std::size_t top_hop() const {
    return static_cast<std::size_t>(std::floor(sample_rate / top_support_hz()));
  }

  /// Signal lengths must be multiples of this.
  std::size_t length_unit() const {
    return top_hop() << (num_octaves - 1);
  }

  std::size_t padded_length(std::size_t n) const {
    const std::size_t unit = length_unit();
    return std::max<std::size_t>(1, (n + unit - 1) / unit) * unit;
  }

  void validate_geometry() const {
    require(sample_rate > 0.0, "cqt: sample_rate must be positive");
    require(bins_per_octave >= 1, "cqt: bins_per_octave must be >= 1");
    require(num_octaves >= 1 && num_octaves <= 24,
            "cqt: num_octaves must be in [1, 24]");
    require(lowest_center() > 0.0, "cqt: f_min must be positive");
    require(lowest_center() * std::ldexp(1.0, num_octaves) <=
                0.5 * sample_rate * (1.0 + 1e-12),
            "cqt: f_min * 2^num_octaves exceeds Nyquist");
  }

  void validate() const {
    validate_geometry();
    require(signal_length > 0, "cqt: signal_length must be positive");
    require(signal_length % length_unit() == 0,
            "cqt: signal_length " + std::to_string(signal_length) +
                " is not a multiple of " + std::to_string(length_unit()) +
                " (pad the signal first)");
  }
};

/// Complex coefficients, one bins x frames matrix per octave (row-major),
/// octave 0 lowest. std::complex storage is interleaved re/im.
struct OctaveCoeffs {
  int bins_per_octave = 0;
  std::vector<std::size_t> frames;
  std::vector<std::vector<Complex>> octaves;

  std::size_t num_octaves() const { return octaves.size(); }

  Complex& at(std::size_t octave, std::size_t bin, std::size_t frame) {
    return octaves[octave][bin * frames[octave] + frame];
  }
  const Complex& at(std::size_t octave, std::size_t bin,
                    std::size_t frame) const {
    return octaves[octave][bin * frames[octave] + frame];
  }

  std::span<Complex> row(std::size_t octave, std::size_t bin) {
    return {octaves[octave].data() + bin * frames[octave], frames[octave]};
  }
  std::span<const Complex> row(std::size_t octave, std::size_t bin) const {
    return {octaves[octave].data() + bin * frames[octave], frames[octave]};
  }

  /// Real view of one octave: re, im, re, im, ...
  std::span<double> interleaved(std::size_t octave) {
    return {reinterpret_cast<double*>(octaves[octave].data()),
            2 * octaves[octave].size()};
  }
  std::span<const double> interleaved(std::size_t octave) const {
    return {reinterpret_cast<const double*>(octaves[octave].data()),
            2 * octaves[octave].size()};
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& o : octaves) n += o.size();
    return n;
  }

  bool same_shape(const OctaveCoeffs& other) const {
    if (bins_per_octave != other.bins_per_octave || frames != other.frames ||
        octaves.size() != other.octaves.size())
      return false;
    for (std::size_t j = 0; j < octaves.size(); ++j)
      if (octaves[j].size() != other.octaves[j].size()) return false;
    return true;
  }
};

/// Real inner product on the interleaved representation.
inline double real_dot(const OctaveCoeffs& a, const OctaveCoeffs& b) {
  require(a.same_shape(b), "real_dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.octaves.size(); ++j)
    acc += dot(a.interleaved(j), b.interleaved(j));
  return acc;
}

class CqtPlan {
 public:
  // Below this value of sum_k g_k^2 a DFT bin counts as uncovered.
  static constexpr double kCoverageFloor = 1e-4;

  struct Filter {
    std::size_t first_bin = 0;  // first DFT bin of the support
    std::vector<double> window;
    std::vector<double> dual;
    double center_hz = 0.0;
  };

  explicit CqtPlan(const CqtParams& params) : params_(params) {
    params_.validate();
    if (params_.f_min <= 0.0) params_.f_min = params_.lowest_center();
    build();
  }

  const CqtParams& params() const { return params_; }
  std::size_t signal_length() const { return params_.signal_length; }
  int bins_per_octave() const { return params_.bins_per_octave; }
  int num_octaves() const { return params_.num_octaves; }
  int num_bins() const { return params_.num_bins(); }

  double center_frequency(int k) const {
    return params_.f_min * std::exp2(static_cast<double>(k) /
                                     params_.bins_per_octave);
  }

  std::size_t hop(int octave) const { return hops_[octave]; }
  std::size_t frames(int octave) const { return frames_[octave]; }
  const std::vector<std::size_t>& hops() const { return hops_; }
  const std::vector<Filter>& filters() const { return filters_; }

  /// sum_k g_k * dual_k per rfft bin: 1 on the covered band, 0 elsewhere.
  const std::vector<double>& aggregate_response() const { return notch_; }

  OctaveCoeffs zeros() const {
    OctaveCoeffs c;
    c.bins_per_octave = params_.bins_per_octave;
    c.frames = frames_;
    c.octaves.resize(frames_.size());
    for (std::size_t j = 0; j < frames_.size(); ++j)
      c.octaves[j].assign(frames_[j] * params_.bins_per_octave, Complex{});
    return c;
  }

  OctaveCoeffs forward(std::span<const double> x) const {
    return analyze(x, false);
  }

  Waveform inverse(const OctaveCoeffs& c) const { return synthesize(c, true); }

  /// Adjoint of forward() under the real inner products.
  Waveform adjoint(const OctaveCoeffs& c) const {
    return synthesize(c, false);
  }

  /// Adjoint of inverse().
  OctaveCoeffs inverse_adjoint(std::span<const double> x) const {
    return analyze(x, true);
  }

  Waveform dc_notch(std::span<const double> x) const {
    check_length(x.size());
    auto spec = fft::rfft(x);
    for (std::size_t n = 0; n < spec.size(); ++n) spec[n] *= notch_[n];
    return fft::irfft(spec, x.size());
  }

  /// Complex coefficient count per input sample.
  double redundancy() const {
    double count = 0.0;
    for (std::size_t m : frames_)
      count += static_cast<double>(m) * params_.bins_per_octave;
    return count / static_cast<double>(params_.signal_length);
  }

  /// Same measure for a rasterized layout where every bin uses the top
  /// octave's frame rate. Comparison only.
  double rasterized_redundancy() const {
    return static_cast<double>(frames_.back()) * num_bins() /
           static_cast<double>(params_.signal_length);
  }

 private:
  void check_length(std::size_t n) const {
    require(n == params_.signal_length,
            "cqt: signal length " + std::to_string(n) + " != plan length " +
                std::to_string(params_.signal_length));
  }

  void build() {
    const std::size_t n = params_.signal_length;
    const int n_oct = params_.num_octaves;
    const int bpo = params_.bins_per_octave;
    const double fs = params_.sample_rate;
    const std::size_t half = n / 2;

    hops_.resize(n_oct);
    frames_.resize(n_oct);
    for (int j = 0; j < n_oct; ++j) {
      hops_[j] = params_.top_hop() << (n_oct - 1 - j);
      frames_[j] = n / hops_[j];
    }

    filters_.resize(static_cast<std::size_t>(num_bins()));
    std::vector<double> frame_op(half + 1, 0.0);
    for (int k = 0; k < num_bins(); ++k) {
      Filter& f = filters_[k];
      f.center_hz = center_frequency(k);
      const double lo = center_frequency(k - 1) * n / fs;
      const double hi = center_frequency(k + 1) * n / fs;
      // Open interval (lo, hi); DC and an even-length Nyquist bin are never
      // part of a support.
      std::size_t first = static_cast<std::size_t>(std::floor(lo)) + 1;
      std::size_t last = static_cast<std::size_t>(std::ceil(hi)) - 1;
      first = std::max<std::size_t>(first, 1);
      last = std::min(last, n % 2 == 0 ? half - 1 : half);
      f.first_bin = first;
      for (std::size_t b = first; b <= last && first <= last; ++b) {
        const double freq = static_cast<double>(b) * fs / n;
        const double u = bpo * std::log2(freq / params_.f_min) - k;
        const double c = std::cos(0.5 * M_PI * u);
        f.window.push_back(std::abs(u) < 1.0 ? c * c : 0.0);
      }
      const std::size_t m = frames_[k / bpo];
      if (f.window.size() > m)
        throw NumericalError("cqt: filter support exceeds frame count");
      for (std::size_t i = 0; i < f.window.size(); ++i)
        frame_op[first + i] += f.window[i] * f.window[i];
    }

    notch_.assign(half + 1, 0.0);
    for (auto& f : filters_) {
      f.dual.resize(f.window.size());
      for (std::size_t i = 0; i < f.window.size(); ++i) {
        const double s = frame_op[f.first_bin + i];
        f.dual[i] = s >= kCoverageFloor ? f.window[i] / s : 0.0;
        notch_[f.first_bin + i] += f.window[i] * f.dual[i];
      }
    }
  }

  template <typename Fn>
  void for_each_octave(Fn&& fn) const {
    const unsigned workers =
        std::min<unsigned>(thread_count(), params_.num_octaves);
    if (workers <= 1) {
      for (int j = 0; j < params_.num_octaves; ++j) fn(j);
      return;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int j = static_cast<int>(w); j < params_.num_octaves;
             j += static_cast<int>(workers))
          fn(j);
      });
  }

  OctaveCoeffs analyze(std::span<const double> x, bool use_dual) const {
    check_length(x.size());
    const std::size_t n = params_.signal_length;
    auto spec = fft::rfft(x);
    const double scale = std::sqrt(2.0 / static_cast<double>(n));
    for (auto& v : spec) v *= scale;

    OctaveCoeffs out = zeros();
    const int bpo = params_.bins_per_octave;
    for_each_octave([&](int j) {
      const std::size_t m = frames_[j];
      const double norm = 1.0 / std::sqrt(static_cast<double>(m));
      std::vector<Complex> buf(m);
      for (int b = 0; b < bpo; ++b) {
        const Filter& f = filters_[j * bpo + b];
        const auto& w = use_dual ? f.dual : f.window;
        std::fill(buf.begin(), buf.end(), Complex{});
        for (std::size_t i = 0; i < w.size(); ++i)
          buf[(f.first_bin + i) % m] = spec[f.first_bin + i] * w[i];
        fft::backward(buf);
        auto row = out.row(j, b);
        for (std::size_t t = 0; t < m; ++t) row[t] = buf[t] * norm;
      }
    });
    return out;
  }

  Waveform synthesize(const OctaveCoeffs& c, bool use_dual) const {
    require(c.bins_per_octave == params_.bins_per_octave &&
                c.frames == frames_ &&
                c.octaves.size() == frames_.size(),
            "cqt: coefficient shape does not match plan");
    for (std::size_t j = 0; j < frames_.size(); ++j)
      require(c.octaves[j].size() == frames_[j] * params_.bins_per_octave,
              "cqt: coefficient shape does not match plan");

    const std::size_t n = params_.signal_length;
    const std::size_t half = n / 2;
    const int bpo = params_.bins_per_octave;
    // Per-octave partial spectra, summed in a fixed order so the result does
    // not depend on the worker count.
    std::vector<std::vector<Complex>> partial(
        frames_.size(), std::vector<Complex>(half + 1));
    for_each_octave([&](int j) {
      const std::size_t m = frames_[j];
      const double norm = 1.0 / std::sqrt(static_cast<double>(m));
      std::vector<Complex> buf(m);
      auto& acc = partial[j];
      for (int b = 0; b < bpo; ++b) {
        const Filter& f = filters_[j * bpo + b];
        const auto& w = use_dual ? f.dual : f.window;
        auto row = c.row(j, b);
        std::copy(row.begin(), row.end(), buf.begin());
        fft::forward(buf);
        for (std::size_t i = 0; i < w.size(); ++i)
          acc[f.first_bin + i] += buf[(f.first_bin + i) % m] * (w[i] * norm);
      }
    });
    std::vector<Complex> spec(half + 1);
    for (const auto& p : partial)
      for (std::size_t i = 0; i <= half; ++i) spec[i] += p[i];
    auto out = fft::irfft_unnormalized(spec, n);
    const double scale = std::sqrt(static_cast<double>(n) / 2.0) / n;
    for (double& v : out) v *= scale;
    return out;
  }

  CqtParams params_;
  std::vector<std::size_t> hops_;
  std::vector<std::size_t> frames_;
  std::vector<Filter> filters_;
  std::vector<double> notch_;
};

inline CqtPlan plan_cqt(const CqtParams& params) { return CqtPlan(params); }

inline OctaveCoeffs cqt_forward(const CqtPlan& plan, std::span<const double> x) {
  return plan.forward(x);
}

inline Waveform cqt_inverse(const CqtPlan& plan, const OctaveCoeffs& c) {
  return plan.inverse(c);
}

inline Waveform dc_notch(const CqtPlan& plan, std::span<const double> x) {
  return plan.dc_notch(x);
}

inline double redundancy(const CqtPlan& plan) { return plan.redundancy(); }

/// Zero-pads x to the next length accepted by a plan with these params.
inline Waveform pad_to_plan(std::span<const double> x, const CqtParams& p) {
  Waveform out(p.padded_length(x.size()), 0.0);
  std::copy(x.begin(), x.end(), out.begin());
  return out;
}

}  // namespace dpinpaint
