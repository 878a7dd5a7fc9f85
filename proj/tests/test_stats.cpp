#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "zclip/rng.hpp"
#include "zclip/stats.hpp"

using namespace zclip;

namespace {

// Independent oracle: standard normal CDF through erfc, inverted by bisection.
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double quantile_by_bisection(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Independent two-pass mean / population variance.
std::pair<double, double> two_pass_moments(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, sq / static_cast<double>(xs.size())};
}

}  // namespace

TEST_CASE("ema_update follows mean-first-then-variance order") {
  const EmaState s = make_ema_state(1.0, 0.0, 0.5);
  const EmaState next = ema_update(s, 3.0);
  CHECK(next.mu == doctest::Approx(2.0).epsilon(1e-15));
  // variance measured against the NEW mean: 0.5*0 + 0.5*(3-2)^2
  CHECK(next.var == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(next.steps_seen == 1);
}

TEST_CASE("ema_update fixed point at the mean with zero variance") {
  // alpha = 0.5 keeps the blend exact in binary
  const EmaState exact = ema_update(make_ema_state(1.7, 0.0, 0.5), 1.7);
  CHECK(exact.mu == 1.7);
  CHECK(exact.var == 0.0);
  for (double alpha : {0.9, 0.97}) {
    const EmaState next = ema_update(make_ema_state(1.7, 0.0, alpha), 1.7);
    CHECK(next.mu == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(next.var <= 1e-30);  // one rounding of the blend, squared
  }
}

TEST_CASE("ema_update against the exact rational value") {
  // mu=0.8, var=0.04, alpha=0.97, value=1.2:
  //   mu'  = 0.97*0.8 + 0.03*1.2 = 0.812
  //   var' = 0.97*0.04 + 0.03*(1.2-0.812)^2 = 270727/6250000 = 0.04331632
  const EmaState next = ema_update(make_ema_state(0.8, 0.04, 0.97), 1.2);
  CHECK(next.mu == doctest::Approx(0.812).epsilon(1e-14));
  CHECK(next.var == doctest::Approx(270727.0 / 6250000.0).epsilon(1e-12));
}

TEST_CASE("ema_update rejects non-finite values and leaves state intact") {
  EmaState s = make_ema_state(1.0, 0.5, 0.97);
  CHECK_THROWS_AS(ema_update(s, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(
      ema_update(s, std::numeric_limits<double>::infinity()),
      std::invalid_argument);
  CHECK(s.mu == 1.0);
  CHECK(s.var == 0.5);
  CHECK(s.steps_seen == 0);
}

TEST_CASE("ema state construction validates parameters") {
  CHECK_THROWS_AS(make_ema_state(0.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_ema_state(0.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_ema_state(0.0, 0.0, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(make_ema_state(0.0, -0.1, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(make_ema_state(std::nan(""), 0.0, 0.9),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_ema_state(0.0, 0.0, 0.9, -1e-9), std::invalid_argument);
  CHECK_NOTHROW(make_ema_state(0.0, 0.0, 0.9, 0.0));  // epsilon 0 is allowed
}

TEST_CASE("z_score basics") {
  const EmaState s = make_ema_state(1.0, 0.25, 0.97, 1e-6);
  CHECK(z_score(s, 2.0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(z_score(s, 1.0) == 0.0);

  // zero variance: the epsilon guard keeps the score finite but huge
  const EmaState flat = make_ema_state(0.5, 0.0, 0.97, 1e-6);
  CHECK(z_score(flat, 0.6) == doctest::Approx(1e5).epsilon(1e-12));
  CHECK_THROWS_AS(z_score(s, std::nan("")), std::invalid_argument);
}

TEST_CASE("z_score of the mean is exactly zero for finalized states") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    WarmupBuffer buf(25);
    for (int i = 0; i < 25; ++i) buf.push(std::abs(rng.normal(1.0, 0.3)));
    const EmaState s = buf.finalize(0.97);
    CHECK(z_score(s, s.mu) == 0.0);
  }
}

TEST_CASE("warmup_finalize matches direct arithmetic") {
  WarmupBuffer buf(3);
  buf.push(1.0);
  buf.push(2.0);
  buf.push(3.0);
  const EmaState s = buf.finalize(0.97);
  CHECK(s.mu == 2.0);
  CHECK(s.var == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.steps_seen == 3);  // the warm-up sample counts as seen steps
}

TEST_CASE("warmup_finalize on a constant buffer gives zero variance") {
  WarmupBuffer buf(25);
  for (int i = 0; i < 25; ++i) buf.push(0.42);
  const EmaState s = buf.finalize(0.97);
  CHECK(s.mu == 0.42);
  CHECK(s.var == 0.0);
}

TEST_CASE("warmup_finalize equals the two-pass oracle bit for bit") {
  Rng rng(123);
  WarmupBuffer buf(25);
  std::vector<double> draws;
  for (int i = 0; i < 25; ++i) {
    const double v = std::abs(rng.normal(0.8, 0.2));
    draws.push_back(v);
    buf.push(v);
  }
  const EmaState s = buf.finalize(0.97);
  const auto [mean, var] = two_pass_moments(draws);
  CHECK(s.mu == mean);
  CHECK(s.var == var);
}

TEST_CASE("warmup buffer enforces its contract") {
  WarmupBuffer buf(2);
  CHECK_THROWS_AS(buf.finalize(0.97), std::logic_error);  // under-filled
  buf.push(1.0);
  CHECK_THROWS_AS(buf.push(-0.5), std::invalid_argument);
  CHECK_THROWS_AS(buf.push(std::nan("")), std::invalid_argument);
  buf.push(2.0);
  CHECK_THROWS_AS(buf.push(3.0), std::logic_error);  // over capacity
  CHECK_NOTHROW(buf.finalize(0.97));
}

TEST_CASE("replaying a trace equals the from-scratch recurrence bitwise") {
  Rng rng(99);
  std::vector<double> trace;
  for (int i = 0; i < 500; ++i) trace.push_back(std::abs(rng.normal(1.0, 0.4)));

  EmaState streamed = make_ema_state(1.0, 0.1, 0.97);
  for (double v : trace) streamed = ema_update(streamed, v);

  // same recurrence written out independently, same summation order
  const double a = 0.97;
  const double b = 1.0 - a;
  double mu = 1.0, var = 0.1;
  for (double v : trace) {
    mu = a * mu + b * v;
    var = a * var + b * (v - mu) * (v - mu);
  }
  CHECK(streamed.mu == mu);
  CHECK(streamed.var == var);
  CHECK(streamed.steps_seen == trace.size());
}

TEST_CASE("ema statistics are positively homogeneous with epsilon zero") {
  Rng rng(5);
  std::vector<double> norms;
  for (int i = 0; i < 400; ++i) norms.push_back(std::abs(rng.normal(1.0, 0.3)));

  for (double k : {0.01, 100.0}) {
    WarmupBuffer base(25), scaled(25);
    for (int i = 0; i < 25; ++i) {
      base.push(norms[i]);
      scaled.push(k * norms[i]);
    }
    EmaState s1 = base.finalize(0.97, 0.0);
    EmaState s2 = scaled.finalize(0.97, 0.0);
    for (std::size_t i = 25; i < norms.size(); ++i) {
      const double z1 = z_score(s1, norms[i]);
      const double z2 = z_score(s2, k * norms[i]);
      CHECK(z2 == doctest::Approx(z1).epsilon(1e-12));
      s1 = ema_update(s1, norms[i]);
      s2 = ema_update(s2, k * norms[i]);
      CHECK(s2.mu == doctest::Approx(k * s1.mu).epsilon(1e-12));
      CHECK(std::sqrt(s2.var) ==
            doctest::Approx(k * std::sqrt(s1.var)).epsilon(1e-12));
    }
  }
}

TEST_CASE("normal_quantile hits the tabulated 0.99 point") {
  CHECK(normal_quantile(0.99) == doctest::Approx(2.32635).epsilon(2e-5));
  CHECK(normal_quantile(0.5) == 0.0);
}

TEST_CASE("normal_quantile agrees with the bisection oracle") {
  CHECK(std::abs(normal_quantile(0.975) - 1.959964) < 1e-6);
  for (int i = 1; i <= 999; ++i) {
    const double p = static_cast<double>(i) / 1000.0;
    const double oracle = quantile_by_bisection(p);
    const double err = std::abs(normal_quantile(p) - oracle);
    CHECK(err < 1e-6);  // the contract
    // published bound of the approximation: 1.2e-9 relative
    CHECK(err < 1.2e-9 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("normal_quantile is strictly increasing and antisymmetric") {
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const double p = 0.001 + (0.999 - 0.001) * static_cast<double>(i) / 999.0;
    const double q = normal_quantile(p);
    CHECK(q > prev);
    prev = q;
    CHECK(std::abs(normal_quantile(1.0 - p) + q) < 1e-9);
  }
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(-0.5), std::invalid_argument);
}

TEST_CASE("normality diagnostic is zero for a window with normal moments") {
  // {+-c, four +-1 pairs} with c^2 = 6 + 5*sqrt(2) has skew 0 and kurtosis 3.
  const double c = std::sqrt(6.0 + 5.0 * std::sqrt(2.0));
  const std::vector<double> window = {c, -c, 1, -1, 1, -1, 1, -1, 1, -1};
  const NormalityResult r = normality_diagnostic(window);
  CHECK(r.statistic <= 1e-12);
  CHECK(r.p_like >= 1.0 - 1e-12);
}

TEST_CASE("normality diagnostic calibration on gaussian windows") {
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<double> window;
    for (int i = 0; i < 135; ++i) window.push_back(rng.normal());
    if (normality_diagnostic(window).p_like <= 0.05) ++rejections;
  }
  CHECK(rejections <= 5);  // >= 95 of 100 seeds pass
}

TEST_CASE("normality diagnostic rejects exponential windows") {
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<double> window;
    for (int i = 0; i < 135; ++i) window.push_back(-std::log(rng.uniform01_open()));
    if (normality_diagnostic(window).p_like < 0.05) ++rejections;
  }
  CHECK(rejections >= 95);
}

TEST_CASE("normality diagnostic input validation") {
  const std::vector<double> short_window = {1, 2, 3, 4, 5, 6, 7};
  CHECK_THROWS_AS(normality_diagnostic(short_window), std::invalid_argument);
  const std::vector<double> flat(20, 3.0);
  CHECK_THROWS_AS(normality_diagnostic(flat), std::invalid_argument);
}
