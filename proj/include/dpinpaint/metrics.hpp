// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpinpaint/common.hpp"
#include "dpinpaint/fft.hpp"
#include "dpinpaint/inpaint.hpp"

namespace dpinpaint {

/// SNR value reported for an error-free estimate.
inline constexpr double kSnrExact = std::numeric_limits<double>::infinity();

/// 10 log10(sum ref^2 / sum (ref - est)^2) over `region` (all samples when
/// absent). Returns kSnrExact when the error is exactly zero.
inline double snr(std::span<const double> reference, std::span<const double> estimate,
                  std::optional<std::span<const std::size_t>> region = std::nullopt) {
  require(reference.size() == estimate.size(), "snr: length mismatch");
  double sig = 0.0, err = 0.0;
  auto add = [&](std::size_t i) {
    const double d = reference[i] - estimate[i];
    sig += reference[i] * reference[i];
    err += d * d;
  };
  if (region) {
    for (std::size_t i : *region) {
      require(i < reference.size(), "snr: region index out of range");
      add(i);
    }
  } else {
    for (std::size_t i = 0; i < reference.size(); ++i) add(i);
  }
  require(sig > 0.0, "snr: reference has zero energy in the region");
  if (err == 0.0) return kSnrExact;
  return 10.0 * std::log10(sig / err);
}

inline std::vector<std::size_t> gap_indices(const GapSpec& spec) {
  std::vector<std::size_t> idx;
  for (const Gap& g : spec.gaps)
    for (std::size_t i = g.start; i < g.end(); ++i) idx.push_back(i);
  return idx;
}

struct StftParams {
  std::size_t window = 2048;
  std::size_t hop = 512;
  double floor = 1e-8;
};

/// Magnitude STFT with a periodic Hann window and no padding; frames x bins.
inline std::vector<std::vector<double>> stft_magnitude(std::span<const double> x,
                                                       const StftParams& p = {}) {
  require(p.window >= 2 && p.hop >= 1, "stft: bad frame parameters");
  require(x.size() >= p.window, "stft: signal shorter than one frame");
  std::vector<double> w(p.window);
  for (std::size_t i = 0; i < p.window; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / p.window);
  const std::size_t frames = 1 + (x.size() - p.window) / p.hop;
  std::vector<std::vector<double>> out(frames);
  std::vector<double> buf(p.window);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < p.window; ++i) buf[i] = x[f * p.hop + i] * w[i];
    const auto spec = fft::rfft(buf);
    out[f].resize(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) out[f][k] = std::abs(spec[k]);
  }
  return out;
}

/// Log-spectral distance in dB: mean over frames of the RMS (over bins) of
/// 20 log10(|S_ref| + eps) - 20 log10(|S_est| + eps).
inline double lsd(std::span<const double> reference, std::span<const double> estimate,
                  const StftParams& p = {}) {
  require(reference.size() == estimate.size(), "lsd: length mismatch");
  const auto a = stft_magnitude(reference, p);
  const auto b = stft_magnitude(estimate, p);
  double total = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a[f].size(); ++k) {
      const double d = 20.0 * std::log10(a[f][k] + p.floor) -
                       20.0 * std::log10(b[f][k] + p.floor);
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(a[f].size()));
  }
  return total / static_cast<double>(a.size());
}

struct GapScore {
  Gap gap;
  double snr = 0.0;
};

struct MetricReport {
  double snr_full = 0.0;
  double snr_gaps = 0.0;  // NaN when there are no gaps
  double lsd = 0.0;
  std::vector<GapScore> per_gap;
};

inline MetricReport evaluate(std::span<const double> reference,
                             std::span<const double> estimate, const GapSpec& spec,
                             const StftParams& stft = {}) {
  require(reference.size() == estimate.size(), "evaluate: length mismatch");
  MetricReport r;
  r.snr_full = snr(reference, estimate);
  const auto idx = gap_indices(spec);
  r.snr_gaps = idx.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : snr(reference, estimate,
                                 std::span<const std::size_t>(idx));
  r.lsd = lsd(reference, estimate, stft);
  for (const Gap& g : spec.gaps) {
    std::vector<std::size_t> one;
    for (std::size_t i = g.start; i < g.end(); ++i) one.push_back(i);
    r.per_gap.push_back({g, snr(reference, estimate, std::span<const std::size_t>(one))});
  }
  return r;
}

namespace detail {
inline nlohmann::json db_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}
}  // namespace detail

/// SNR of an exact estimate is written as the string "inf".
inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& g : r.per_gap)
    gaps.push_back({{"start", g.gap.start},
                    {"length", g.gap.length},
                    {"snr_db", detail::db_value(g.snr)}});
  return {{"snr_full_db", detail::db_value(r.snr_full)},
          {"snr_gaps_db", detail::db_value(r.snr_gaps)},
          {"lsd_db", detail::db_value(r.lsd)},
          {"per_gap", gaps}};
}

inline void write_report_csv(const std::string& path, const MetricReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out.precision(10);
  out << "scope,start,length,snr_db,lsd_db\n";
  out << "full,,," << r.snr_full << ',' << r.lsd << '\n';
  out << "gaps,,," << r.snr_gaps << ",\n";
  for (const auto& g : r.per_gap)
    out << "gap," << g.gap.start << ',' << g.gap.length << ',' << g.snr << ",\n";
}

/// Magnitude spectrogram in dB, rows = frequency bins, columns = frames.
inline void write_spectrogram_csv(const std::string& path, std::span<const double> x,
                                  double sample_rate, const StftParams& p = {}) {
  const auto mag = stft_magnitude(x, p);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write spectrogram: " + path);
  out << "# sample_rate=" << sample_rate << " window=" << p.window
      << " hop=" << p.hop << " frames=" << mag.size()
      << " bins=" << (mag.empty() ? 0 : mag[0].size()) << " unit=dB\n";
  out.precision(6);
  for (std::size_t k = 0; k < mag[0].size(); ++k) {
    for (std::size_t f = 0; f < mag.size(); ++f) {
      if (f) out << ',';
      out << 20.0 * std::log10(mag[f][k] + p.floor);
    }
    out << '\n';
  }
}

}  // namespace dpinpaint
