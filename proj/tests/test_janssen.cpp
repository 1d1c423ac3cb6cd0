#include <catch_amalgamated.hpp>

#include <complex>

#include "dpinpaint/janssen.hpp"
#include "dpinpaint/metrics.hpp"
#include "support.hpp"

using namespace dpinpaint;
using Catch::Approx;

namespace {

Waveform ar_process(Rng& rng, std::span<const double> a, std::size_t n, double noise) {
  Waveform x(n + 500, 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double v = noise * rng.normal();
    for (std::size_t i = 0; i < a.size() && i < t; ++i) v += a[i] * x[t - 1 - i];
    x[t] = v;
  }
  return {x.begin() + 500, x.end()};
}

Waveform with_gaps(Waveform x, const GapSpec& spec) {
  for (const Gap& g : spec.gaps) std::fill(x.begin() + g.start, x.begin() + g.end(), 0.0);
  return x;
}

}  // namespace

TEST_CASE("Burg recovers an AR(1) coefficient") {
  Rng rng(1);
  const std::vector<double> a{0.9};
  const auto x = ar_process(rng, a, 4000, 0.1);
  const auto m = ar_fit(x, 1);
  REQUIRE(m.order() == 1);
  CHECK(std::abs(m.coefficients[0] - 0.9) < 0.05);
  CHECK_FALSE(m.order_reduced);
}

TEST_CASE("Burg on a sinusoid puts a pole pair at the tone frequency") {
  const double w = 2.0 * M_PI * 440.0 / 8000.0;
  const auto x = testing::sine(2000, 440.0, 8000.0, 1.0, 0.3);
  const auto m = ar_fit(x, 2);
  REQUIRE(m.order() == 2);
  // poles of z^2 - a1 z - a2
  const std::complex<double> disc = std::sqrt(std::complex<double>(
      m.coefficients[0] * m.coefficients[0] + 4.0 * m.coefficients[1]));
  const std::complex<double> pole = 0.5 * (m.coefficients[0] + disc);
  CHECK(std::abs(std::abs(std::arg(pole)) - w) < 0.01 * w);
  CHECK(std::abs(pole) <= 1.0);
  CHECK(std::abs(pole) > 0.99);
}

TEST_CASE("Burg models are minimum phase") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testing::randn(rng, 300);
    const auto m = ar_fit(x, 12);
    // step-down recursion: all reflection coefficients must be inside (-1, 1)
    std::vector<double> a(m.coefficients);
    for (std::size_t p = a.size(); p-- > 0;) {
      const double k = a[p];
      REQUIRE(std::abs(k) < 1.0);
      std::vector<double> prev(p);
      for (std::size_t i = 0; i < p; ++i) prev[i] = (a[i] + k * a[p - 1 - i]) / (1.0 - k * k);
      a = prev;
    }
  }
}

TEST_CASE("degenerate segments reduce the order") {
  const auto m = ar_fit(Waveform(100, 0.0), 4);
  CHECK(m.order_reduced);
  CHECK(m.order() < 4);
  CHECK_THROWS_AS(ar_fit(Waveform(12, 1.0), 4), ValidationError);
}

TEST_CASE("missing samples solve the AR least-squares problem") {
  Rng rng(3);
  const std::vector<double> a{1.2, -0.5, 0.1};
  auto x = ar_process(rng, a, 200, 1.0);
  const auto model = ar_fit(x, 3);
  const std::size_t g0 = 80, len = 25, p = 3;
  Waveform seg(x);
  solve_missing(seg, g0, len, model);

  // dense oracle: residual e = A u + b over t in [p, L), unknowns u = x[g0..g0+len)
  const auto h = model.error_filter();
  const std::size_t rows = x.size() - p;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, len);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  for (std::size_t t = p; t < x.size(); ++t)
    for (std::size_t i = 0; i <= p; ++i) {
      const std::size_t s = t - i;
      if (s >= g0 && s < g0 + len)
        A(t - p, s - g0) += h[i];
      else
        b(t - p) += h[i] * x[s];
    }
  const Eigen::VectorXd u = A.colPivHouseholderQr().solve(-b);
  for (std::size_t j = 0; j < len; ++j) CHECK(seg[g0 + j] == Approx(u(j)).margin(1e-9));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (i < g0 || i >= g0 + len) REQUIRE(seg[i] == x[i]);
}

TEST_CASE("banded solver regularizes a singular system") {
  const std::vector<double> r{0.0, 0.0};
  const std::vector<double> rhs{1.0, 1.0, 1.0};
  const auto z = detail::solve_banded_toeplitz(r, rhs);
  for (double v : z) CHECK(std::isfinite(v));
}

TEST_CASE("Janssen on a tone with a 10 ms gap") {
  const double fs = 44100.0;
  const auto x = testing::sine(44100, 440.0, fs, 0.5);
  const GapSpec spec{{{20000, 441}}, x.size()};
  const auto y = with_gaps(x, spec);
  JanssenOptions opt;
  opt.order = 8;
  opt.iterations = 5;
  const auto res = janssen_inpaint_detailed(y, spec, opt);
  const auto idx = gap_indices(spec);
  CHECK(snr(x, res.output, std::span<const std::size_t>(idx)) >= 40.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (i < 20000 || i >= 20441) REQUIRE(res.output[i] == y[i]);
  REQUIRE(res.gaps.size() == 1);
  CHECK(res.gaps[0].order == 8);
  CHECK(res.gaps[0].objective.size() == 5);
}

TEST_CASE("Janssen objective does not increase over iterations") {
  Rng rng(4);
  const std::vector<double> a{1.5, -0.9, 0.2};
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = ar_process(rng, a, 3000, 0.1);
    const GapSpec spec{{{1200, 60}, {2100, 30}}, x.size()};
    JanssenOptions opt;
    opt.iterations = 6;
    const auto res = janssen_inpaint_detailed(with_gaps(x, spec), spec, opt);
    for (const auto& g : res.gaps)
      for (std::size_t i = 1; i < g.objective.size(); ++i)
        REQUIRE(g.objective[i] <= g.objective[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("Janssen edge cases") {
  Rng rng(5);
  const auto x = testing::randn(rng, 1000);
  CHECK(janssen_inpaint(x, GapSpec{{}, 1000}) == x);
  try {
    janssen_inpaint(x, GapSpec{{{2, 20}}, 1000});
    FAIL("expected a context error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("context") != std::string::npos);
  }
  JanssenOptions opt;
  opt.order = 200;
  CHECK_THROWS_AS(janssen_inpaint(x, GapSpec{{{500, 20}}, 1000}, opt), ValidationError);
}

TEST_CASE("more context helps on stationary AR data") {
  const std::vector<double> a{1.6, -0.95, 0.2, -0.05};
  std::vector<double> mean_snr;
  for (std::size_t ctx : {32, 64, 256, 1024}) {
    Rng rng(6);
    double acc = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto x = ar_process(rng, a, 2100, 1.0);
      const GapSpec spec{{{1040, 20}}, x.size()};
      JanssenOptions opt;
      opt.order = 8;
      opt.max_context = ctx;
      const auto out = janssen_inpaint(with_gaps(x, spec), spec, opt);
      const auto idx = gap_indices(spec);
      acc += snr(x, out, std::span<const std::size_t>(idx));
    }
    mean_snr.push_back(acc / 50.0);
  }
  for (std::size_t i = 1; i < mean_snr.size(); ++i) CHECK(mean_snr[i] > mean_snr[i - 1]);
}
