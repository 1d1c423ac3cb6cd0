// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Noise schedule, denoiser preconditioning, the weighted denoising loss and
// the stochastic sampler. Nothing here depends on a particular denoiser; the
// conditioned sampler in inpaint.hpp reuses run_sampler() with an extra
// conditioning stage.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpinpaint/common.hpp"
#include "dpinpaint/rng.hpp"

namespace dpinpaint {

// ---------------------------------------------------------------------------
// Denoiser and post-filter contracts

/// denoise(x_sigma, sigma) estimates the clean signal.
template <typename D>
concept Denoiser = requires(const D& d, std::span<const double> x, double s) {
  { d.denoise(x, s) } -> std::convertible_to<Waveform>;
};

/// Adds vjp(x_sigma, sigma, v) = J^T v, J the Jacobian of denoise in x_sigma.
template <typename D>
concept DifferentiableDenoiser =
    Denoiser<D> && requires(const D& d, std::span<const double> x, double s,
                            std::span<const double> v) {
      { d.vjp(x, s, v) } -> std::convertible_to<Waveform>;
    };

/// Linear filter applied to every denoiser output, with its adjoint.
template <typename F>
concept PostFilter = requires(const F& f, std::span<const double> x) {
  { f.apply(x) } -> std::convertible_to<Waveform>;
  { f.adjoint(x) } -> std::convertible_to<Waveform>;
};

struct NoPostFilter {
  Waveform apply(std::span<const double> x) const { return {x.begin(), x.end()}; }
  Waveform adjoint(std::span<const double> x) const {
    return {x.begin(), x.end()};
  }
};

// ---------------------------------------------------------------------------
// Schedule

struct NoiseSchedule {
  std::vector<double> sigmas;  // sigma_0 = sigma_max > ... > sigma_{T-1}
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double rho = 0.0;
  double s_churn = 0.0;
  double gamma = 0.0;  // min(s_churn / T, sqrt(2) - 1)

  std::size_t steps() const { return sigmas.size(); }
};

inline double churn_gamma(double s_churn, std::size_t steps) {
  return std::min(s_churn / static_cast<double>(steps), std::sqrt(2.0) - 1.0);
}

/// sigma_i = (smax^(1/rho) + i/(T-1) * (smin^(1/rho) - smax^(1/rho)))^rho.
inline NoiseSchedule make_schedule(std::size_t steps, double sigma_min,
                                   double sigma_max, double rho,
                                   double s_churn) {
  require(steps >= 2, "schedule: need at least 2 steps");
  require(sigma_min > 0.0 && sigma_min < sigma_max,
          "schedule: need 0 < sigma_min < sigma_max");
  require(rho >= 1.0, "schedule: rho must be >= 1");
  require(s_churn >= 0.0, "schedule: s_churn must be >= 0");

  NoiseSchedule s;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.rho = rho;
  s.s_churn = s_churn;
  s.gamma = churn_gamma(s_churn, steps);
  s.sigmas.resize(steps);
  const double a = std::pow(sigma_max, 1.0 / rho);
  const double b = std::pow(sigma_min, 1.0 / rho);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    s.sigmas[i] = std::pow(a + t * (b - a), rho);
  }
  // The closed form hits both endpoints exactly in real arithmetic; pow()
  // round-off would not.
  s.sigmas.front() = sigma_max;
  s.sigmas.back() = sigma_min;
  return s;
}

// ---------------------------------------------------------------------------
// Preconditioning

struct Preconditioning {
  double sigma_data = 0.5;

  double c_skip(double sigma) const {
    const double sd2 = sigma_data * sigma_data;
    return sd2 / (sigma * sigma + sd2);
  }
  double c_out(double sigma) const {
    return sigma * sigma_data / std::sqrt(sigma * sigma + sigma_data * sigma_data);
  }
  double c_in(double sigma) const {
    return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data);
  }
  double c_noise(double sigma) const { return 0.25 * std::log(sigma); }
  double loss_weight(double sigma) const {
    const double c = c_out(sigma);
    return 1.0 / (c * c);
  }
};

/// Raw network F: (c_in * x, c_noise) -> output of the same length.
template <typename F>
concept RawNetwork = requires(const F& f, std::span<const double> x, double c) {
  { f(x, c) } -> std::convertible_to<Waveform>;
};

/// c_skip * x + c_out * F(c_in * x, 1/4 ln sigma)
template <RawNetwork F>
Waveform precondition_denoise(const Preconditioning& pre, const F& raw_net,
                              std::span<const double> x_sigma, double sigma) {
  require(sigma > 0.0, "precondition_denoise: sigma must be positive");
  Waveform scaled(x_sigma.begin(), x_sigma.end());
  const double cin = pre.c_in(sigma);
  for (double& v : scaled) v *= cin;
  Waveform f = raw_net(std::span<const double>(scaled), pre.c_noise(sigma));
  require(f.size() == x_sigma.size(), "raw network changed the signal length");
  const double cs = pre.c_skip(sigma), co = pre.c_out(sigma);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = cs * x_sigma[i] + co * f[i];
  return f;
}

/// (x_hat0 - x_sigma) / sigma^2
inline Waveform score_from_denoiser(std::span<const double> x_hat0,
                                    std::span<const double> x_sigma,
                                    double sigma) {
  require(sigma > 0.0, "score: sigma must be positive");
  require(x_hat0.size() == x_sigma.size(), "score: length mismatch");
  Waveform s(x_hat0.size());
  const double inv = 1.0 / (sigma * sigma);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (x_hat0[i] - x_sigma[i]) * inv;
  return s;
}

/// lambda(sigma) * ||D(x0 + sigma * eps, sigma) - x0||^2, lambda = 1/c_out^2.
template <RawNetwork F>
double training_loss(const Preconditioning& pre, const F& raw_net,
                     std::span<const double> x0, double sigma,
                     std::span<const double> epsilon) {
  require(sigma > 0.0, "training_loss: sigma must be positive");
  require(x0.size() == epsilon.size(), "training_loss: length mismatch");
  Waveform noisy(x0.size());
  for (std::size_t i = 0; i < noisy.size(); ++i)
    noisy[i] = x0[i] + sigma * epsilon[i];
  const Waveform d = precondition_denoise(pre, raw_net, noisy, sigma);
  double err = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = d[i] - x0[i];
    err += r * r;
  }
  return pre.loss_weight(sigma) * err;
}

// ---------------------------------------------------------------------------
// Sampler

enum class SamplerOrder { first, second };

struct SamplerConfig {
  NoiseSchedule schedule;
  std::uint64_t rng_seed = 0;
  SamplerOrder order = SamplerOrder::first;
};

struct TraceRow {
  std::size_t step = 0;
  double sigma = 0.0;
  double sigma_tilde = 0.0;
  double norm_x = 0.0;
  double norm_x_hat0 = 0.0;
};

inline void write_trace_csv(const std::string& path,
                            const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file: " + path);
  out.precision(17);
  out << "i,sigma,sigma_tilde,norm_x,norm_x_hat0\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.sigma << ',' << r.sigma_tilde << ',' << r.norm_x
        << ',' << r.norm_x_hat0 << '\n';
}

/// Generic reverse-diffusion loop.
///
/// `estimate(x_tilde, sigma_tilde)` returns the (possibly conditioned)
/// clean-signal estimate used in the update. The state starts at
/// N(0, sigma_max^2 I) and takes T-1 steps down the schedule, so the result
/// sits at noise level sigma_min. The last step adds no churn.
template <typename Estimate>
Waveform run_sampler(const SamplerConfig& cfg, std::size_t length,
                     Estimate&& estimate,
                     std::vector<TraceRow>* trace = nullptr) {
  const auto& sched = cfg.schedule;
  require(sched.steps() >= 2, "sampler: schedule needs at least 2 steps");
  require(length > 0, "sampler: empty signal");
  Rng init_rng = Rng(cfg.rng_seed).split(0);
  Rng churn_rng = Rng(cfg.rng_seed).split(1);

  Waveform x(length);
  init_rng.fill_normal(x);
  for (double& v : x) v *= sched.sigmas.front();

  Waveform noise(length);
  const std::size_t last = sched.steps() - 2;
  for (std::size_t i = 0; i <= last; ++i) {
    const double sigma = sched.sigmas[i];
    const double sigma_next = sched.sigmas[i + 1];
    const double gamma = i < last ? sched.gamma : 0.0;
    const double sigma_tilde = sigma + gamma * sigma;

    if (gamma > 0.0) {
      churn_rng.fill_normal(noise);
      const double extra =
          std::sqrt(sigma_tilde * sigma_tilde - sigma * sigma);
      for (std::size_t n = 0; n < length; ++n) x[n] += extra * noise[n];
    }

    const Waveform x_hat0 = estimate(std::span<const double>(x), sigma_tilde);
    require(x_hat0.size() == length, "sampler: estimate changed length");

    // x_next = x~ + (sigma_next - sigma~) * (x~ - x_hat0) / sigma~
    const double step = (sigma_next - sigma_tilde) / sigma_tilde;
    Waveform x_next(length);
    for (std::size_t n = 0; n < length; ++n)
      x_next[n] = x[n] + step * (x[n] - x_hat0[n]);

    if (cfg.order == SamplerOrder::second) {
      // Heun: average the slopes at both ends of the step.
      const Waveform x_hat0_next =
          estimate(std::span<const double>(x_next), sigma_next);
      const double h = sigma_next - sigma_tilde;
      for (std::size_t n = 0; n < length; ++n) {
        const double d0 = (x[n] - x_hat0[n]) / sigma_tilde;
        const double d1 = (x_next[n] - x_hat0_next[n]) / sigma_next;
        x_next[n] = x[n] + h * 0.5 * (d0 + d1);
      }
    }

    if (!all_finite(x_next))
      throw NumericalError("sampler: non-finite state at step " +
                           std::to_string(i));
    if (trace != nullptr)
      trace->push_back({i, sigma, sigma_tilde, norm2(x_next), norm2(x_hat0)});
    x = std::move(x_next);
  }
  return x;
}

/// Unconditional sampling: the estimate is the (post-filtered) denoiser.
template <Denoiser D, PostFilter P = NoPostFilter>
Waveform sample_unconditional(const SamplerConfig& cfg, const D& denoiser,
                              std::size_t length, const P& post = P{},
                              std::vector<TraceRow>* trace = nullptr) {
  return run_sampler(
      cfg, length,
      [&](std::span<const double> x, double sigma) {
        return post.apply(denoiser.denoise(x, sigma));
      },
      trace);
}

}  // namespace dpinpaint
