// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpinpaint/common.hpp"
#include "dpinpaint/diffusion.hpp"

namespace dpinpaint {

// ---------------------------------------------------------------------------
// Gaps

struct Gap {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  bool operator==(const Gap&) const = default;
};

struct GapSpec {
  std::vector<Gap> gaps;
  std::size_t signal_length = 0;

  /// Disjoint, sorted, non-empty, inside [0, N).
  void validate() const {
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      const Gap& g = gaps[i];
      require(g.length >= 1, "gap " + std::to_string(i) + " has zero length");
      require(g.end() <= signal_length,
              "gap " + std::to_string(i) + " extends past the signal end");
      if (i > 0)
        require(gaps[i - 1].end() <= g.start,
                "gaps " + std::to_string(i - 1) + " and " + std::to_string(i) +
                    " overlap or are unsorted");
    }
  }
};

/// `count` gaps of `length` samples centred at (i + 1/2) N / count.
inline GapSpec equally_spaced_gaps(std::size_t signal_length, std::size_t count,
                                   std::size_t length) {
  GapSpec spec{{}, signal_length};
  for (std::size_t i = 0; i < count; ++i) {
    const double center = (i + 0.5) * static_cast<double>(signal_length) / count;
    const double start = std::round(center - 0.5 * static_cast<double>(length));
    require(start >= 0.0, "equally_spaced_gaps: gaps do not fit");
    spec.gaps.push_back({static_cast<std::size_t>(start), length});
  }
  spec.validate();
  return spec;
}

inline std::size_t ms_to_samples(double ms, double sample_rate) {
  require(ms >= 0.0, "negative duration in gap spec");
  return static_cast<std::size_t>(std::llround(ms * sample_rate / 1000.0));
}

/// Parses {"sample_rate": int, "gaps": [{"start_ms": f, "length_ms": f}]}.
/// Gaps that round to zero samples are dropped. Gaps are sorted by start.
inline GapSpec gap_spec_from_json(const nlohmann::json& j,
                                  std::size_t signal_length,
                                  double* sample_rate_out = nullptr) {
  GapSpec spec{{}, signal_length};
  try {
    for (const auto& [key, value] : j.items())
      require(key == "sample_rate" || key == "gaps",
              "gap spec: unknown key '" + key + "'");
    const double fs = j.at("sample_rate").get<double>();
    require(fs > 0.0, "gap spec: sample_rate must be positive");
    if (sample_rate_out != nullptr) *sample_rate_out = fs;
    for (const auto& g : j.at("gaps")) {
      for (const auto& [key, value] : g.items())
        require(key == "start_ms" || key == "length_ms",
                "gap spec: unknown gap key '" + key + "'");
      const std::size_t len = ms_to_samples(g.at("length_ms").get<double>(), fs);
      if (len == 0) continue;
      spec.gaps.push_back({ms_to_samples(g.at("start_ms").get<double>(), fs), len});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("gap spec: ") + e.what());
  }
  std::sort(spec.gaps.begin(), spec.gaps.end(),
            [](const Gap& a, const Gap& b) { return a.start < b.start; });
  spec.validate();
  return spec;
}

inline GapSpec load_gap_spec(const std::string& path, std::size_t signal_length,
                             double* sample_rate_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read gap spec: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("gap spec " + path + ": " + e.what());
  }
  return gap_spec_from_json(j, signal_length, sample_rate_out);
}

inline nlohmann::json gap_spec_to_json(const GapSpec& spec, double sample_rate) {
  nlohmann::json gaps = nlohmann::json::array();
  for (const Gap& g : spec.gaps)
    gaps.push_back({{"start_ms", 1000.0 * g.start / sample_rate},
                    {"length_ms", 1000.0 * g.length / sample_rate}});
  return {{"sample_rate", static_cast<long>(std::lround(sample_rate))},
          {"gaps", gaps}};
}

// ---------------------------------------------------------------------------
// Problem

struct InpaintingProblem {
  GapSpec spec;
  Waveform y;            // observations, zero inside gaps
  Waveform mask;         // 0 inside gaps, 1 elsewhere
  Waveform mask_smooth;  // mask with raised-cosine fades on the reliable side
  std::size_t fade_samples = 0;
  double sigma_n = 0.0;

  std::size_t size() const { return y.size(); }
};

/// Builds y = m . x, the binary mask, and the smoothed mask. Each fade
/// takes round(fade_ms * fs / 1000) reliable samples next to a gap and runs
/// a raised cosine from (just below) 1 down to (just above) 0.
inline InpaintingProblem build_problem(const GapSpec& spec,
                                       std::span<const double> x, double fade_ms,
                                       double sample_rate) {
  require(spec.signal_length == x.size(),
          "build_problem: gap spec length != signal length");
  spec.validate();
  InpaintingProblem p;
  p.spec = spec;
  p.fade_samples = ms_to_samples(fade_ms, sample_rate);
  const std::size_t n = x.size();
  const std::size_t fade = p.fade_samples;

  // Reliable runs between gaps must hold both fades.
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i <= spec.gaps.size(); ++i) {
    const std::size_t next_start = i < spec.gaps.size() ? spec.gaps[i].start : n;
    const std::size_t run = next_start - prev_end;
    const bool left_edge = i > 0;                   // run follows a gap
    const bool right_edge = i < spec.gaps.size();   // run precedes a gap
    const std::size_t needed = (left_edge ? fade : 0) + (right_edge ? fade : 0);
    if (run > 0 && needed > 0)
      require(run > needed, "fade of " + std::to_string(fade) +
                                " samples collides with a neighbouring gap or "
                                "the signal boundary");
    if (i < spec.gaps.size()) prev_end = spec.gaps[i].end();
  }

  p.mask.assign(n, 1.0);
  for (const Gap& g : spec.gaps)
    std::fill(p.mask.begin() + g.start, p.mask.begin() + g.end(), 0.0);
  p.mask_smooth = p.mask;
  std::vector<double> ramp(fade);  // ramp[i]: i samples away from the gap edge
  for (std::size_t i = 0; i < fade; ++i)
    ramp[i] = 0.5 * (1.0 - std::cos(M_PI * (i + 1.0) / (fade + 1.0)));
  for (const Gap& g : spec.gaps) {
    for (std::size_t i = 0; i < fade && i < g.start; ++i)
      if (p.mask[g.start - 1 - i] == 1.0) p.mask_smooth[g.start - 1 - i] = ramp[i];
    for (std::size_t i = 0; i < fade && g.end() + i < n; ++i)
      if (p.mask[g.end() + i] == 1.0) p.mask_smooth[g.end() + i] = ramp[i];
  }

  p.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.y[i] = p.mask[i] * x[i];
  return p;
}

// ---------------------------------------------------------------------------
// Guidance

struct GuidanceConfig {
  double xi_prime = 0.25;
  double norm_floor = 1e-12;
};

struct LikelihoodGrad {
  Waveform grad;        // d/dx~ ||y - m . H(D(x~))||^2
  double grad_norm = 0.0;
  Waveform x_hat0;      // H(D(x~))
};

template <DifferentiableDenoiser D, PostFilter P = NoPostFilter>
LikelihoodGrad likelihood_grad(const InpaintingProblem& problem,
                               const D& denoiser, std::span<const double> x_tilde,
                               double sigma, const P& post = P{}) {
  require(sigma > 0.0, "likelihood_grad: sigma must be positive");
  require(x_tilde.size() == problem.size(), "likelihood_grad: length mismatch");
  LikelihoodGrad out;
  out.x_hat0 = post.apply(denoiser.denoise(x_tilde, sigma));
  Waveform cot(x_tilde.size());
  for (std::size_t i = 0; i < cot.size(); ++i) {
    const double m = problem.mask[i];
    cot[i] = -2.0 * m * (problem.y[i] - m * out.x_hat0[i]);
  }
  out.grad = denoiser.vjp(x_tilde, sigma, post.adjoint(cot));
  out.grad_norm = norm2(out.grad);
  return out;
}

/// xi(sigma) = xi' sqrt(N) / (sigma max(||grad||, floor))
inline double xi_scale(const GuidanceConfig& cfg, double sigma, double grad_norm,
                       std::size_t length) {
  require(sigma > 0.0, "xi_scale: sigma must be positive");
  return cfg.xi_prime * std::sqrt(static_cast<double>(length)) /
         (sigma * std::max(grad_norm, cfg.norm_floor));
}

/// mask_smooth . y + (1 - mask_smooth) . x_hat0, exact at mask values 0 and 1.
inline Waveform data_consistency(const InpaintingProblem& problem,
                                 std::span<const double> x_hat0) {
  require(x_hat0.size() == problem.size(), "data_consistency: length mismatch");
  Waveform out(x_hat0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double w = problem.mask_smooth[i];
    if (w == 1.0)
      out[i] = problem.y[i];
    else if (w == 0.0)
      out[i] = x_hat0[i];
    else
      out[i] = w * problem.y[i] + (1.0 - w) * x_hat0[i];
  }
  return out;
}

/// Conditioned sampler: denoise, post-filter, reconstruction guidance,
/// smoothed data consistency, update. After the loop, samples where the
/// smoothed mask is exactly 1 are copied from y, so observations outside
/// the fades come back bit-identical.
template <DifferentiableDenoiser D, PostFilter P = NoPostFilter>
Waveform inpaint(const InpaintingProblem& problem, const D& denoiser,
                 const GuidanceConfig& guidance, const SamplerConfig& sampler,
                 const P& post = P{}, std::vector<TraceRow>* trace = nullptr) {
  require(guidance.xi_prime >= 0.0, "inpaint: xi' must be >= 0");
  require(guidance.norm_floor > 0.0, "inpaint: norm_floor must be positive");
  const std::size_t n = problem.size();
  Waveform x = run_sampler(
      sampler, n,
      [&](std::span<const double> x_tilde, double sigma) {
        Waveform x_hat0;
        if (guidance.xi_prime > 0.0) {
          auto lg = likelihood_grad(problem, denoiser, x_tilde, sigma, post);
          const double xi = xi_scale(guidance, sigma, lg.grad_norm, n);
          const double k = sigma * sigma * xi;
          x_hat0 = std::move(lg.x_hat0);
          for (std::size_t i = 0; i < n; ++i) x_hat0[i] -= k * lg.grad[i];
        } else {
          x_hat0 = post.apply(denoiser.denoise(x_tilde, sigma));
        }
        return data_consistency(problem, x_hat0);
      },
      trace);
  for (std::size_t i = 0; i < n; ++i)
    if (problem.mask_smooth[i] == 1.0) x[i] = problem.y[i];
  return x;
}

}  // namespace dpinpaint
