// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpinpaint/common.hpp"
#include "dpinpaint/cqt.hpp"
#include "dpinpaint/diffusion.hpp"
#include "dpinpaint/fft.hpp"
#include "dpinpaint/rng.hpp"

namespace dpinpaint {

// ---------------------------------------------------------------------------
// Closed-form MMSE denoiser for a stationary (circulant) Gaussian prior.

class GaussianAnalyticDenoiser {
 public:
  /// `eigenvalues` holds the prior covariance eigenvalues for DFT bins
  /// 0..N/2 (the circulant is symmetric, so the rest mirror these).
  GaussianAnalyticDenoiser(std::size_t length, std::vector<double> eigenvalues)
      : length_(length), lambda_(std::move(eigenvalues)) {
    require(length_ > 0, "gaussian denoiser: empty signal");
    require(lambda_.size() == length_ / 2 + 1,
            "gaussian denoiser: need N/2 + 1 eigenvalues");
    for (double l : lambda_)
      require(l >= 0.0 && std::isfinite(l),
              "gaussian denoiser: eigenvalues must be finite and >= 0");
  }

  static GaussianAnalyticDenoiser white(std::size_t length, double variance) {
    return {length, std::vector<double>(length / 2 + 1, variance)};
  }

  /// Circular AR(1) prior x[n] = a x[n-1] + w[n]. `variance` is the
  /// marginal variance of the non-circular process.
  static GaussianAnalyticDenoiser ar1(std::size_t length, double a,
                                      double variance) {
    require(std::abs(a) < 1.0, "ar1 prior: |a| must be < 1");
    std::vector<double> lambda(length / 2 + 1);
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      const double w = 2.0 * M_PI * static_cast<double>(k) / length;
      lambda[k] = variance * (1.0 - a * a) / (1.0 + a * a - 2.0 * a * std::cos(w));
    }
    return {length, std::move(lambda)};
  }

  std::size_t size() const { return length_; }
  const std::vector<double>& eigenvalues() const { return lambda_; }

  double gain(std::size_t bin, double sigma) const {
    const double l = lambda_[bin];
    return l / (l + sigma * sigma);
  }

  Waveform denoise(std::span<const double> x, double sigma) const {
    return filter(x, sigma);
  }

  /// The map is symmetric, so J^T v = J v.
  Waveform vjp(std::span<const double> /*x*/, double sigma,
               std::span<const double> v) const {
    return filter(v, sigma);
  }

 private:
  Waveform filter(std::span<const double> x, double sigma) const {
    require(x.size() == length_, "gaussian denoiser: length mismatch");
    auto spec = fft::rfft(x);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= gain(k, sigma);
    return fft::irfft(spec, length_);
  }

  std::size_t length_;
  std::vector<double> lambda_;
};

inline Waveform gaussian_denoise(const GaussianAnalyticDenoiser& d,
                                 std::span<const double> x, double sigma) {
  return d.denoise(x, sigma);
}

inline Waveform gaussian_vjp(const GaussianAnalyticDenoiser& d,
                             std::span<const double> x, double sigma,
                             std::span<const double> cotangent) {
  return d.vjp(x, sigma, cotangent);
}

// ---------------------------------------------------------------------------
// DC-notch post filter (a projection, hence self-adjoint).

struct DcNotchFilter {
  std::shared_ptr<const CqtPlan> plan;

  Waveform apply(std::span<const double> x) const { return plan->dc_notch(x); }
  Waveform adjoint(std::span<const double> x) const {
    return plan->dc_notch(x);
  }
};

// ---------------------------------------------------------------------------
// Linear CQT-domain denoiser: D(x) = c_skip x + c_out ICQT(g . CQT(c_in x)).
// One real gain per (octave, bin), shared by all frames. No bias terms.

class LinearCqtDenoiser {
 public:
  LinearCqtDenoiser(std::shared_ptr<const CqtPlan> plan, Preconditioning pre,
                    std::vector<double> gains)
      : plan_(std::move(plan)), pre_(pre), gains_(std::move(gains)) {
    require(plan_ != nullptr, "linear denoiser: null plan");
    require(gains_.size() == static_cast<std::size_t>(plan_->num_bins()),
            "linear denoiser: need one gain per CQT bin");
  }

  static LinearCqtDenoiser constant(std::shared_ptr<const CqtPlan> plan,
                                    Preconditioning pre, double value) {
    const auto k = static_cast<std::size_t>(plan->num_bins());
    return {std::move(plan), pre, std::vector<double>(k, value)};
  }

  const CqtPlan& plan() const { return *plan_; }
  std::shared_ptr<const CqtPlan> plan_ptr() const { return plan_; }
  const Preconditioning& preconditioning() const { return pre_; }
  const std::vector<double>& gains() const { return gains_; }
  std::size_t size() const { return plan_->signal_length(); }

  LinearCqtDenoiser with_gains(std::vector<double> gains) const {
    return {plan_, pre_, std::move(gains)};
  }

  /// ICQT(g . CQT(x)). Ignores the noise conditioning.
  Waveform raw(std::span<const double> x) const {
    OctaveCoeffs c = plan_->forward(x);
    scale(c);
    return plan_->inverse(c);
  }

  Waveform denoise(std::span<const double> x, double sigma) const {
    return precondition_denoise(
        pre_, [this](std::span<const double> s, double) { return raw(s); }, x,
        sigma);
  }

  /// J^T v = c_skip v + c_out c_in CQT^T(g . ICQT^T(v)).
  Waveform vjp(std::span<const double> /*x*/, double sigma,
               std::span<const double> v) const {
    require(v.size() == size(), "linear denoiser: length mismatch");
    OctaveCoeffs c = plan_->inverse_adjoint(v);
    scale(c);
    Waveform out = plan_->adjoint(c);
    const double cs = pre_.c_skip(sigma);
    const double k = pre_.c_out(sigma) * pre_.c_in(sigma);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cs * v[i] + k * out[i];
    return out;
  }

 private:
  void scale(OctaveCoeffs& c) const {
    const int bpo = plan_->bins_per_octave();
    for (std::size_t j = 0; j < c.num_octaves(); ++j)
      for (int b = 0; b < bpo; ++b) {
        const double g = gains_[j * bpo + b];
        for (Complex& v : c.row(j, b)) v *= g;
      }
  }

  std::shared_ptr<const CqtPlan> plan_;
  Preconditioning pre_;
  std::vector<double> gains_;
};

inline Waveform linear_cqt_denoise(const LinearCqtDenoiser& d,
                                   std::span<const double> x, double sigma) {
  return d.denoise(x, sigma);
}

// ---------------------------------------------------------------------------
// Trainer

struct TrainOptions {
  std::size_t steps = 2000;
  std::size_t batch_size = 4;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;
  double sigma_min = 1e-4;
  double sigma_max = 1.0;
  std::size_t eval_batch = 16;
};

struct TrainResult {
  std::vector<double> gains;
  std::vector<double> ema_gains;
  std::vector<double> batch_loss;  // mean minibatch loss before each update
  std::vector<double> eval_loss;   // EMA gains on a fixed batch, after each update
};

namespace detail {

struct TrainSample {
  std::size_t index = 0;
  double sigma = 0.0;
  Waveform noise;
};

inline TrainSample draw_sample(Rng& rng, std::size_t dataset_size,
                               std::size_t length, const TrainOptions& opt) {
  TrainSample s;
  s.index = rng.index(dataset_size);
  const double lo = std::log(opt.sigma_min), hi = std::log(opt.sigma_max);
  s.sigma = std::exp(lo + (hi - lo) * rng.uniform());
  s.noise.resize(length);
  rng.fill_normal(s.noise);
  return s;
}

// Loss of one sample; accumulates d loss / d gains into `grad` when given.
inline double sample_loss(const LinearCqtDenoiser& d, std::span<const double> x0,
                          const TrainSample& s, std::vector<double>* grad) {
  const auto& pre = d.preconditioning();
  const auto& plan = d.plan();
  Waveform noisy(x0.size());
  const double cin = pre.c_in(s.sigma);
  Waveform scaled(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    noisy[i] = x0[i] + s.sigma * s.noise[i];
    scaled[i] = cin * noisy[i];
  }
  const OctaveCoeffs u = plan.forward(scaled);
  OctaveCoeffs gu = u;
  const int bpo = plan.bins_per_octave();
  for (std::size_t j = 0; j < gu.num_octaves(); ++j)
    for (int b = 0; b < bpo; ++b)
      for (Complex& v : gu.row(j, b)) v *= d.gains()[j * bpo + b];
  const Waveform f = plan.inverse(gu);

  const double cs = pre.c_skip(s.sigma), co = pre.c_out(s.sigma);
  Waveform r(x0.size());
  double err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = cs * noisy[i] + co * f[i] - x0[i];
    err += r[i] * r[i];
  }
  const double weight = pre.loss_weight(s.sigma);
  if (grad != nullptr) {
    const OctaveCoeffs w = plan.inverse_adjoint(r);
    const double k = 2.0 * weight * co;
    for (std::size_t j = 0; j < u.num_octaves(); ++j)
      for (int b = 0; b < bpo; ++b) {
        auto wr = w.row(j, b);
        auto ur = u.row(j, b);
        double acc = 0.0;
        for (std::size_t m = 0; m < ur.size(); ++m)
          acc += wr[m].real() * ur[m].real() + wr[m].imag() * ur[m].imag();
        (*grad)[j * bpo + b] += k * acc;
      }
  }
  return weight * err;
}

}  // namespace detail

/// Adam on the weighted denoising loss with sigma log-uniform in
/// [sigma_min, sigma_max]. The gradient is exact because the model is linear
/// in its gains. Tracks an exponential moving average of the gains.
inline TrainResult train_linear(const LinearCqtDenoiser& init,
                                std::span<const Waveform> dataset,
                                const TrainOptions& opt, Rng& rng) {
  require(!dataset.empty(), "train_linear: empty dataset");
  require(opt.batch_size >= 1 && opt.eval_batch >= 1,
          "train_linear: batch sizes must be >= 1");
  require(opt.sigma_min > 0.0 && opt.sigma_min < opt.sigma_max,
          "train_linear: need 0 < sigma_min < sigma_max");
  require(opt.ema_decay >= 0.0 && opt.ema_decay < 1.0,
          "train_linear: ema_decay must be in [0, 1)");
  const std::size_t length = init.size();
  for (const auto& x : dataset)
    require(x.size() == length, "train_linear: signal length != plan length");

  Rng eval_rng = rng.split(0xE7A1);
  std::vector<detail::TrainSample> eval_set;
  for (std::size_t i = 0; i < opt.eval_batch; ++i)
    eval_set.push_back(detail::draw_sample(eval_rng, dataset.size(), length, opt));

  TrainResult out;
  out.gains = init.gains();
  out.ema_gains = init.gains();
  const std::size_t k = out.gains.size();
  std::vector<double> m1(k, 0.0), m2(k, 0.0), grad(k);

  for (std::size_t step = 0; step < opt.steps; ++step) {
    const LinearCqtDenoiser model = init.with_gains(out.gains);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < opt.batch_size; ++b) {
      const auto s = detail::draw_sample(rng, dataset.size(), length, opt);
      loss += detail::sample_loss(model, dataset[s.index], s, &grad);
    }
    loss /= static_cast<double>(opt.batch_size);
    if (!std::isfinite(loss))
      throw NumericalError("train_linear: non-finite loss at step " +
                           std::to_string(step));
    out.batch_loss.push_back(loss);

    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t i = 0; i < k; ++i) {
      const double g = grad[i] / static_cast<double>(opt.batch_size);
      m1[i] = opt.beta1 * m1[i] + (1.0 - opt.beta1) * g;
      m2[i] = opt.beta2 * m2[i] + (1.0 - opt.beta2) * g * g;
      out.gains[i] -= opt.learning_rate * (m1[i] / bc1) /
                      (std::sqrt(m2[i] / bc2) + opt.adam_eps);
      out.ema_gains[i] =
          opt.ema_decay * out.ema_gains[i] + (1.0 - opt.ema_decay) * out.gains[i];
    }

    const LinearCqtDenoiser ema = init.with_gains(out.ema_gains);
    double eval = 0.0;
    for (const auto& s : eval_set)
      eval += detail::sample_loss(ema, dataset[s.index], s, nullptr);
    out.eval_loss.push_back(eval / static_cast<double>(eval_set.size()));
  }
  return out;
}

/// Trailing moving average with the given window (shorter at the start).
inline std::vector<double> smooth(std::span<const double> v, std::size_t window) {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= window) acc -= v[i - window];
    out.push_back(acc / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: CSV of (octave, bin, gain, ema_gain) plus a JSON sidecar with
// the CQT geometry and sigma_data.

struct GainCheckpoint {
  CqtParams params;  // signal_length unused; gains do not depend on it
  double sigma_data = 0.5;
  std::vector<double> gains;
  std::vector<double> ema_gains;
};

inline void save_checkpoint(const std::string& csv_path,
                            const GainCheckpoint& ck) {
  const int bpo = ck.params.bins_per_octave;
  require(ck.gains.size() == ck.ema_gains.size() &&
              ck.gains.size() ==
                  static_cast<std::size_t>(ck.params.num_bins()),
          "checkpoint: gain count does not match params");
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write checkpoint: " + csv_path);
  csv.precision(17);
  csv << "octave,bin,gain,ema_gain\n";
  for (std::size_t k = 0; k < ck.gains.size(); ++k)
    csv << k / bpo << ',' << k % bpo << ',' << ck.gains[k] << ','
        << ck.ema_gains[k] << '\n';

  nlohmann::json side = {{"sample_rate", ck.params.sample_rate},
                         {"bins_per_octave", ck.params.bins_per_octave},
                         {"num_octaves", ck.params.num_octaves},
                         {"f_min", ck.params.lowest_center()},
                         {"sigma_data", ck.sigma_data}};
  std::ofstream js(csv_path + ".json");
  if (!js) throw IoError("cannot write checkpoint sidecar: " + csv_path + ".json");
  js << side.dump(2) << '\n';
}

inline GainCheckpoint load_checkpoint(const std::string& csv_path) {
  GainCheckpoint ck;
  std::ifstream js(csv_path + ".json");
  if (!js) throw IoError("cannot read checkpoint sidecar: " + csv_path + ".json");
  try {
    const auto side = nlohmann::json::parse(js);
    ck.params.sample_rate = side.at("sample_rate").get<double>();
    ck.params.bins_per_octave = side.at("bins_per_octave").get<int>();
    ck.params.num_octaves = side.at("num_octaves").get<int>();
    ck.params.f_min = side.at("f_min").get<double>();
    ck.sigma_data = side.at("sigma_data").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint sidecar: ") + e.what());
  }
  ck.params.validate_geometry();

  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot read checkpoint: " + csv_path);
  const auto k = static_cast<std::size_t>(ck.params.num_bins());
  ck.gains.assign(k, 0.0);
  ck.ema_gains.assign(k, 0.0);
  std::vector<bool> seen(k, false);
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    long octave = -1, bin = -1;
    double g = 0.0, e = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    row >> octave >> c1 >> bin >> c2 >> g >> c3 >> e;
    if (!row || c1 != ',' || c2 != ',' || c3 != ',' || octave < 0 || bin < 0 ||
        octave >= ck.params.num_octaves || bin >= ck.params.bins_per_octave)
      throw ValidationError("checkpoint: malformed row '" + line + "'");
    const std::size_t idx = octave * ck.params.bins_per_octave + bin;
    ck.gains[idx] = g;
    ck.ema_gains[idx] = e;
    seen[idx] = true;
  }
  for (bool s : seen)
    if (!s) throw ValidationError("checkpoint: missing (octave, bin) rows");
  return ck;
}

inline void write_loss_curve_csv(const std::string& path, const TrainResult& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss curve: " + path);
  out.precision(17);
  out << "step,batch_loss,eval_loss\n";
  for (std::size_t i = 0; i < r.batch_loss.size(); ++i)
    out << i << ',' << r.batch_loss[i] << ',' << r.eval_loss[i] << '\n';
}

}  // namespace dpinpaint
