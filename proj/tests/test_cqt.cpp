#include <catch_amalgamated.hpp>

#include <cstdlib>

#include "dpinpaint/cqt.hpp"
#include "dpinpaint/cqt_io.hpp"
#include "support.hpp"

using namespace dpinpaint;
using Catch::Approx;

namespace {

CqtParams small_params() {
  CqtParams p;
  p.sample_rate = 8000.0;
  p.bins_per_octave = 12;
  p.num_octaves = 4;
  p.signal_length = 2304;
  return p;
}

CqtParams full_band_params() {
  CqtParams p;  // 44.1 kHz, B = 64, 8 octaves
  p.signal_length = p.padded_length(static_cast<std::size_t>(4.17 * 44100));
  return p;
}

const CqtPlan& full_band_plan() {
  static const CqtPlan plan(full_band_params());
  return plan;
}

OctaveCoeffs random_coeffs(const CqtPlan& plan, Rng& rng) {
  OctaveCoeffs c = plan.zeros();
  for (std::size_t j = 0; j < c.num_octaves(); ++j)
    for (double& v : c.interleaved(j)) v = rng.normal();
  return c;
}

std::vector<double> bin_energy(const OctaveCoeffs& c) {
  std::vector<double> e;
  for (std::size_t j = 0; j < c.num_octaves(); ++j)
    for (int b = 0; b < c.bins_per_octave; ++b) {
      double acc = 0.0;
      for (const auto& v : c.row(j, b)) acc += std::norm(v);
      e.push_back(acc);
    }
  return e;
}

}  // namespace

TEST_CASE("plan geometry for the 44.1 kHz, 64-bin, 8-octave configuration") {
  const CqtPlan& plan = full_band_plan();
  CHECK(plan.num_bins() == 512);
  CHECK(plan.params().f_min == Approx(44100.0 / 512.0));
  // top filter's upper edge sits at Nyquist
  CHECK(plan.center_frequency(512) == Approx(22050.0));
  CHECK(plan.hop(7) == 93);
  CHECK(plan.signal_length() == 190464);
  for (int j = 1; j < plan.num_octaves(); ++j) {
    CHECK(plan.hop(j - 1) == 2 * plan.hop(j));
    CHECK(plan.frames(j) == 2 * plan.frames(j - 1));
  }
}

TEST_CASE("degenerate and octave-doubling plans") {
  CqtParams one;
  one.sample_rate = 8000.0;
  one.bins_per_octave = 1;
  one.num_octaves = 1;
  one.f_min = 2000.0;
  one.signal_length = one.length_unit() * 4;
  const CqtPlan p1(one);
  REQUIRE(p1.filters().size() == 1);
  CHECK(p1.filters()[0].center_hz == 2000.0);

  CqtParams p = small_params();
  p.f_min = 110.0;
  p.signal_length = p.padded_length(4000);
  const CqtPlan p2(p);
  CHECK(p2.center_frequency(12) == Approx(220.0).epsilon(1e-14));
}

TEST_CASE("invalid parameters are rejected") {
  CqtParams p = small_params();
  p.f_min = 300.0;  // 300 * 16 > 4000
  CHECK_THROWS_AS(CqtPlan(p), ValidationError);
  p = small_params();
  p.signal_length = 2305;
  CHECK_THROWS_AS(CqtPlan(p), ValidationError);
  p = small_params();
  p.bins_per_octave = 0;
  CHECK_THROWS_AS(CqtPlan(p), ValidationError);

  const CqtPlan plan(small_params());
  CHECK_THROWS_AS(plan.forward(Waveform(100)), ValidationError);
  OctaveCoeffs c = plan.zeros();
  c.octaves.pop_back();
  CHECK_THROWS_AS(plan.inverse(c), ValidationError);
}

TEST_CASE("forward coefficients match a direct evaluation") {
  const CqtParams p = small_params();
  const CqtPlan plan(p);
  Rng rng(11);
  const Waveform x = testing::randn(rng, p.signal_length);
  const auto c = plan.forward(x);
  const auto spec = testing::naive_rdft(x);
  const std::size_t n = p.signal_length;
  const double fmin = p.lowest_center();

  double worst = 0.0;
  for (int k : {0, 5, 17, 30, 47}) {
    const int j = k / p.bins_per_octave, b = k % p.bins_per_octave;
    const std::size_t m = plan.frames(j);
    for (std::size_t t : {std::size_t{0}, m / 3, m - 1}) {
      std::complex<double> acc;
      for (std::size_t bin = 1; bin < n / 2; ++bin) {
        const double u = p.bins_per_octave * std::log2(bin * p.sample_rate / n / fmin) - k;
        if (std::abs(u) >= 1.0) continue;
        const double w = std::pow(std::cos(0.5 * M_PI * u), 2);
        const double ang = 2.0 * M_PI * static_cast<double>((bin % m) * t % m) / m;
        acc += std::sqrt(2.0 / n) * spec[bin] * w * std::polar(1.0, ang);
      }
      acc /= std::sqrt(static_cast<double>(m));
      worst = std::max(worst, std::abs(acc - c.at(j, b, t)) / (std::abs(acc) + 1e-3));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("zero in, zero out") {
  const CqtPlan plan(small_params());
  const auto c = plan.forward(Waveform(plan.signal_length(), 0.0));
  for (std::size_t j = 0; j < c.num_octaves(); ++j)
    for (double v : c.interleaved(j)) REQUIRE(v == 0.0);
  const auto y = plan.inverse(plan.zeros());
  for (double v : y) REQUIRE(v == 0.0);
}

TEST_CASE("linearity") {
  const CqtPlan plan(small_params());
  Rng rng(3);
  const auto x = testing::randn(rng, plan.signal_length());
  const auto z = testing::randn(rng, plan.signal_length());
  const double a = rng.normal(), b = rng.normal();
  Waveform mix(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * z[i];
  const auto cm = plan.forward(mix);
  const auto cx = plan.forward(x), cz = plan.forward(z);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < cm.num_octaves(); ++j) {
    const auto vm = cm.interleaved(j), vx = cx.interleaved(j), vz = cz.interleaved(j);
    for (std::size_t i = 0; i < vm.size(); ++i) {
      const double d = vm[i] - (a * vx[i] + b * vz[i]);
      num += d * d;
      den += vm[i] * vm[i];
    }
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("round trip on in-span signals is exact") {
  const CqtPlan& plan = full_band_plan();
  Rng rng(5);
  const auto x = plan.inverse(random_coeffs(plan, rng));
  const auto y = plan.inverse(plan.forward(x));
  CHECK(testing::rel_err(y, x) < 1e-6);
}

TEST_CASE("round trip equals the DC notch") {
  for (const CqtParams& p : {small_params(), full_band_params()}) {
    const CqtPlan plan(p);
    Rng rng(7);
    auto x = testing::randn(rng, plan.signal_length());
    for (double& v : x) v += 3.0;  // DC offset must disappear
    const auto y = plan.inverse(plan.forward(x));
    const auto proj = plan.dc_notch(x);
    CHECK(testing::rel_err(y, proj) < 1e-6);
    double mean = 0.0;
    for (double v : y) mean += v;
    CHECK(std::abs(mean / y.size()) < 1e-10);
  }
}

TEST_CASE("adjoints") {
  const CqtPlan plan(small_params());
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = testing::randn(rng, plan.signal_length());
    const auto c = random_coeffs(plan, rng);
    const double lhs = real_dot(plan.forward(x), c);
    const double rhs = dot(x, plan.adjoint(c));
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(lhs));
    const double lhs2 = dot(plan.inverse(c), x);
    const double rhs2 = real_dot(c, plan.inverse_adjoint(x));
    CHECK(std::abs(lhs2 - rhs2) <= 1e-8 * std::abs(lhs2));
  }
}

TEST_CASE("dc_notch") {
  const CqtPlan& plan = full_band_plan();
  const std::size_t n = plan.signal_length();
  const auto dc = plan.dc_notch(Waveform(n, 1.0));
  CHECK(norm2(dc) < 1e-10 * std::sqrt(static_cast<double>(n)));

  // fs/8 falls on an exact DFT bin here, so there is no leakage to worry about
  REQUIRE(n % 8 == 0);
  const auto tone = testing::sine(n, 44100.0 / 8, 44100.0);
  const auto out = plan.dc_notch(tone);
  CHECK(-20.0 * std::log10(testing::rel_err(out, tone)) >= 80.0);

  Rng rng(1);
  const auto x = testing::randn(rng, n);
  const auto once = plan.dc_notch(x);
  const auto twice = plan.dc_notch(once);
  CHECK(testing::rel_err(twice, once) < 1e-10);

  for (double v : plan.aggregate_response()) REQUIRE((std::abs(v - 1.0) < 1e-12 || v == 0.0));
}

TEST_CASE("a tone at a bin center lands in that bin") {
  const CqtPlan& plan = full_band_plan();
  const int bpo = plan.bins_per_octave();
  for (int k : {2 * bpo + 20, 4 * bpo + 32, 6 * bpo + 40}) {
    const auto x = testing::sine(plan.signal_length(), plan.center_frequency(k), 44100.0);
    const auto e = bin_energy(plan.forward(x));
    const auto peak = std::max_element(e.begin(), e.end()) - e.begin();
    CHECK(peak == k);
    const int j = k / bpo;
    double own = 0.0, neighbours = 0.0;
    for (int q = 0; q < static_cast<int>(e.size()); ++q) {
      if (q / bpo == j) own += e[q];
      if (q / bpo == j - 1 || q / bpo == j + 1) neighbours += e[q];
    }
    CHECK(10.0 * std::log10(neighbours / own) < -20.0);
  }
}

TEST_CASE("an octave shift moves the peak by exactly one octave of bins") {
  const CqtPlan& plan = full_band_plan();
  const int bpo = plan.bins_per_octave();
  auto harmonic = [&](double f0) {
    Waveform x(plan.signal_length(), 0.0);
    for (int h = 1; h <= 3; ++h) {
      const auto s = testing::sine(x.size(), h * f0, 44100.0, 1.0 / h);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];
    }
    const auto e = bin_energy(plan.forward(x));
    return std::max_element(e.begin(), e.end()) - e.begin();
  };
  for (double f0 : {150.0, 233.0, 440.0, 1000.0}) CHECK(harmonic(2 * f0) - harmonic(f0) == bpo);
}

TEST_CASE("redundancy") {
  const CqtPlan& plan = full_band_plan();
  CHECK(plan.redundancy() == Approx(1.3709677419354838));
  CHECK(plan.rasterized_redundancy() == Approx(5.5053763440860215));

  // halving f_min doubles every hop for this geometry
  CqtParams a = small_params();
  CqtParams b = a;
  b.f_min = a.lowest_center() / 2.0;
  const CqtPlan pa(a), pb(b);
  REQUIRE(pb.hop(3) == 2 * pa.hop(3));
  CHECK(pb.redundancy() * 2.0 == Approx(pa.redundancy()));
}

TEST_CASE("threaded execution is bit-identical") {
  const CqtPlan& plan = full_band_plan();
  Rng rng(2);
  const auto x = testing::randn(rng, plan.signal_length());
  ::setenv("DPINPAINT_THREADS", "1", 1);
  const auto c1 = plan.forward(x);
  const auto y1 = plan.inverse(c1);
  ::setenv("DPINPAINT_THREADS", "4", 1);
  const auto c4 = plan.forward(x);
  const auto y4 = plan.inverse(c4);
  ::unsetenv("DPINPAINT_THREADS");
  CHECK(c1.octaves == c4.octaves);
  CHECK(y1 == y4);
}

TEST_CASE("raw coefficient files round trip") {
  const CqtPlan plan(small_params());
  Rng rng(4);
  const auto x = testing::randn(rng, plan.signal_length());
  const auto c = plan.forward(x);
  const std::string path = "test_cqt_raw.coeffs.csv";
  write_coeff_raw(path, plan, c);
  const RawCoeffs back = read_coeff_raw(path);
  CHECK(back.params.signal_length == plan.signal_length());
  CHECK(back.coeffs.octaves == c.octaves);
  const auto paths = write_coeff_db_csv("test_cqt_db", plan, c);
  CHECK(paths.size() == 4);
}
