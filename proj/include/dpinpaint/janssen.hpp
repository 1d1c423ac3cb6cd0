// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Autoregressive gap interpolation: alternate a Burg AR fit over a context
// window spanning the gap with an exact least-squares solve for the missing
// samples that minimizes the AR residual energy.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dpinpaint/common.hpp"
#include "dpinpaint/inpaint.hpp"

namespace dpinpaint {

struct ArModel {
  // x[n] ~ sum_{i=1..p} coefficients[i-1] * x[n-i]
  std::vector<double> coefficients;
  std::size_t requested_order = 0;
  bool order_reduced = false;
  double residual_variance = 0.0;

  std::size_t order() const { return coefficients.size(); }

  /// Prediction-error filter h = [1, -a_1, ..., -a_p].
  std::vector<double> error_filter() const {
    std::vector<double> h(coefficients.size() + 1, 1.0);
    for (std::size_t i = 0; i < coefficients.size(); ++i) h[i + 1] = -coefficients[i];
    return h;
  }
};

/// Burg estimate. Reflection coefficients stay inside (-1, 1), so the model
/// is minimum phase. When the remaining forward/backward errors carry no
/// energy, the recursion stops early and `order_reduced` is set.
inline ArModel ar_fit(std::span<const double> x, std::size_t order) {
  require(order >= 1, "ar_fit: order must be >= 1");
  require(x.size() > 3 * order, "ar_fit: segment must be longer than 3p");
  const std::size_t n = x.size();

  ArModel model;
  model.requested_order = order;
  std::vector<double> f(x.begin(), x.end()), b(x.begin(), x.end());
  std::vector<double> a{1.0};
  double energy = 0.0;
  for (double v : x) energy += v * v;
  double err = energy / static_cast<double>(n);
  const double tiny = 1e-300 + 1e-24 * energy;

  for (std::size_t m = 1; m <= order; ++m) {
    double num = 0.0, den = 0.0;
    for (std::size_t t = m; t < n; ++t) {
      num += f[t] * b[t - 1];
      den += f[t] * f[t] + b[t - 1] * b[t - 1];
    }
    if (!(den > tiny)) {
      model.order_reduced = true;
      break;
    }
    const double k = -2.0 * num / den;
    std::vector<double> next(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) next[i] += a[i];
    for (std::size_t i = 0; i < m; ++i) next[m - i] += k * a[i];
    a = std::move(next);
    for (std::size_t t = n - 1; t >= m; --t) {
      const double ft = f[t];
      f[t] = ft + k * b[t - 1];
      b[t] = b[t - 1] + k * ft;
    }
    err *= 1.0 - k * k;
  }
  model.coefficients.resize(a.size() - 1);
  for (std::size_t i = 1; i < a.size(); ++i) model.coefficients[i - 1] = -a[i];
  model.residual_variance = err;
  return model;
}

/// Sum over t in [p, L) of (sum_i h_i x[t-i])^2.
inline double ar_residual_energy(std::span<const double> x, const ArModel& model) {
  const auto h = model.error_filter();
  const std::size_t p = model.order();
  double acc = 0.0;
  for (std::size_t t = p; t < x.size(); ++t) {
    double e = 0.0;
    for (std::size_t i = 0; i <= p; ++i) e += h[i] * x[t - i];
    acc += e * e;
  }
  return acc;
}

namespace detail {

// Solves the symmetric positive-definite Toeplitz band system with first row
// `r` (bandwidth r.size() - 1) by banded Cholesky. Adds a growing ridge if a
// pivot fails.
inline std::vector<double> solve_banded_toeplitz(std::span<const double> r,
                                                 std::span<const double> rhs) {
  const std::size_t m = rhs.size();
  const std::size_t bw = r.size() - 1;
  double ridge = 1e-12 * std::max(r[0], 1.0);
  for (int attempt = 0; attempt < 12; ++attempt, ridge *= 100.0) {
    // L[i][d] holds L(i, i-d).
    std::vector<double> L(m * (bw + 1), 0.0);
    auto at = [&](std::size_t i, std::size_t d) -> double& {
      return L[i * (bw + 1) + d];
    };
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      const std::size_t j0 = i > bw ? i - bw : 0;
      for (std::size_t j = j0; j <= i; ++j) {
        double s = (i - j <= bw ? r[i - j] : 0.0) + (i == j ? ridge : 0.0);
        const std::size_t k0 = std::max(j0, j > bw ? j - bw : 0);
        for (std::size_t k = k0; k < j; ++k) s -= at(i, i - k) * at(j, j - k);
        if (i == j) {
          if (!(s > 0.0)) {
            ok = false;
            break;
          }
          at(i, 0) = std::sqrt(s);
        } else {
          at(i, i - j) = s / at(j, 0);
        }
      }
    }
    if (!ok) continue;
    std::vector<double> z(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k0 = i > bw ? i - bw : 0;
      for (std::size_t k = k0; k < i; ++k) z[i] -= at(i, i - k) * z[k];
      z[i] /= at(i, 0);
    }
    for (std::size_t ii = m; ii-- > 0;) {
      const std::size_t k1 = std::min(m - 1, ii + bw);
      for (std::size_t k = ii + 1; k <= k1; ++k) z[ii] -= at(k, k - ii) * z[k];
      z[ii] /= at(ii, 0);
    }
    if (std::all_of(z.begin(), z.end(), [](double v) { return std::isfinite(v); })) return z;
  }
  throw NumericalError("janssen: normal equations are singular");
}

// Least squares min ||A u + b|| where A(t, j) = h[t - j] for 0 <= t - j <= p,
// t in [0, n + p). Row-wise Givens QR on the band keeps the conditioning of A
// rather than squaring it. Returns an empty vector if R is rank deficient.
inline std::vector<double> solve_banded_lsq(std::span<const double> h,
                                            std::span<const double> b, std::size_t n) {
  const std::size_t p = h.size() - 1, w = p + 1;
  std::vector<double> R(n * w, 0.0), qtb(n, 0.0);
  std::vector<char> filled(n, 0);
  std::vector<double> row(w);
  for (std::size_t t = 0; t < n + p; ++t) {
    std::size_t c = t > p ? t - p : 0;
    if (c >= n) break;
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = c; j <= t && j < n; ++j) row[j - c] = h[t - j];
    double beta = -b[t];
    while (c < n) {
      if (row[0] != 0.0) {
        double* rc = &R[c * w];
        if (!filled[c]) {
          std::copy(row.begin(), row.end(), rc);
          qtb[c] = beta;
          filled[c] = 1;
          break;
        }
        const double r = std::hypot(rc[0], row[0]);
        const double cs = rc[0] / r, sn = row[0] / r;
        for (std::size_t d = 0; d < w; ++d) {
          const double u = rc[d], v = row[d];
          rc[d] = cs * u + sn * v;
          row[d] = cs * v - sn * u;
        }
        const double u = qtb[c];
        qtb[c] = cs * u + sn * beta;
        beta = cs * beta - sn * u;
      }
      std::rotate(row.begin(), row.begin() + 1, row.end());
      row[w - 1] = 0.0;
      ++c;
    }
  }
  double dmax = 0.0;
  for (std::size_t c = 0; c < n; ++c) dmax = std::max(dmax, std::abs(R[c * w]));
  std::vector<double> u(n, 0.0);
  for (std::size_t c = n; c-- > 0;) {
    const double diag = R[c * w];
    if (!(std::abs(diag) > 1e-14 * dmax)) return {};
    double acc = qtb[c];
    for (std::size_t d = 1; d < w && c + d < n; ++d) acc -= R[c * w + d] * u[c + d];
    u[c] = acc / diag;
  }
  return u;
}

}  // namespace detail

/// Missing samples [g0, g0 + len) of `segment` that minimize the residual
/// energy of `model`. Requires at least p samples of context on each side.
inline void solve_missing(std::span<double> segment, std::size_t g0,
                          std::size_t len, const ArModel& model) {
  const std::size_t p = model.order();
  if (p == 0 || len == 0) return;
  const auto h = model.error_filter();
  // autocorrelation of h
  std::vector<double> r(p + 1, 0.0);
  for (std::size_t d = 0; d <= p; ++d)
    for (std::size_t i = 0; i + d <= p; ++i) r[d] += h[i] * h[i + d];

  // residual of the known part, gap samples zeroed
  std::vector<double> known(segment.begin(), segment.end());
  std::fill(known.begin() + g0, known.begin() + g0 + len, 0.0);
  std::vector<double> e_known(g0 + len + p, 0.0);
  for (std::size_t t = g0; t < g0 + len + p; ++t)
    for (std::size_t q = 0; q <= p; ++q) e_known[t] += h[q] * known[t - q];
  auto u = detail::solve_banded_lsq(
      h, std::span<const double>(e_known).subspan(g0), len);
  if (u.empty()) {
    std::vector<double> rhs(len, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i <= p; ++i) acc += h[i] * e_known[g0 + j + i];
      rhs[j] = -acc;
    }
    u = detail::solve_banded_toeplitz(r, rhs);
  }
  for (std::size_t j = 0; j < len; ++j) segment[g0 + j] = u[j];
}

struct JanssenOptions {
  std::size_t order = 0;  // 0: min(100, 3 * gap + 2), capped by context / 3
  std::size_t iterations = 5;
  std::size_t max_context = 2048;
};

struct JanssenGapReport {
  Gap gap;
  std::size_t order = 0;
  std::size_t context_left = 0;
  std::size_t context_right = 0;
  std::vector<double> objective;  // residual energy after each iteration
};

struct JanssenResult {
  Waveform output;
  std::vector<JanssenGapReport> gaps;
};

inline JanssenResult janssen_inpaint_detailed(std::span<const double> y,
                                              const GapSpec& spec,
                                              const JanssenOptions& opt = {}) {
  require(spec.signal_length == y.size(), "janssen: gap spec length mismatch");
  spec.validate();
  require(opt.iterations >= 1, "janssen: need at least one iteration");
  JanssenResult result;
  result.output.assign(y.begin(), y.end());
  Waveform& x = result.output;

  for (std::size_t gi = 0; gi < spec.gaps.size(); ++gi) {
    const Gap& g = spec.gaps[gi];
    const std::size_t prev_end = gi > 0 ? spec.gaps[gi - 1].end() : 0;
    const std::size_t next_start =
        gi + 1 < spec.gaps.size() ? spec.gaps[gi + 1].start : y.size();
    const std::size_t left = std::min(opt.max_context, g.start - prev_end);
    const std::size_t right = std::min(opt.max_context, next_start - g.end());
    const std::size_t ctx = std::min(left, right);

    std::size_t p = opt.order;
    if (p == 0) p = std::min<std::size_t>({100, 3 * g.length + 2, ctx / 3});
    require(p >= 1 && ctx >= 3 * p,
            "janssen: gap at " + std::to_string(g.start) + " has " +
                std::to_string(left) + "/" + std::to_string(right) +
                " reliable context samples; need at least " +
                std::to_string(3 * std::max<std::size_t>(p, 1)) +
                " on each side");

    JanssenGapReport report{g, p, left, right, {}};
    std::span<double> segment(x.data() + g.start - left, left + g.length + right);
    std::fill(segment.begin() + left, segment.begin() + left + g.length, 0.0);
    // Burg does not exactly minimize the residual energy, so a refit or a
    // re-solve is only accepted when it does not raise the objective.
    ArModel model;
    double objective = 0.0;
    Waveform keep(g.length);
    for (std::size_t it = 0; it < opt.iterations; ++it) {
      ArModel fit = ar_fit(segment, p);
      if (fit.order() == 0) break;
      if (model.order() == 0 || ar_residual_energy(segment, fit) <= objective) {
        model = std::move(fit);
        objective = ar_residual_energy(segment, model);
      }
      std::copy_n(segment.begin() + left, g.length, keep.begin());
      solve_missing(segment, left, g.length, model);
      const double next = ar_residual_energy(segment, model);
      if (it > 0 && next > objective)
        std::copy(keep.begin(), keep.end(), segment.begin() + left);
      else
        objective = next;
      report.objective.push_back(objective);
    }
    result.gaps.push_back(std::move(report));
  }
  return result;
}

inline Waveform janssen_inpaint(std::span<const double> y, const GapSpec& spec,
                                const JanssenOptions& opt = {}) {
  return janssen_inpaint_detailed(y, spec, opt).output;
}

}  // namespace dpinpaint
