#include "zclip/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace zclip {

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite, got " +
                                std::to_string(v));
  }
}

}  // namespace

EmaState make_ema_state(double mu, double var, double alpha, double epsilon) {
  check_finite(mu, "mu");
  check_finite(var, "var");
  if (var < 0.0) {
    throw std::invalid_argument("var must be >= 0, got " + std::to_string(var));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie strictly in (0,1), got " +
                                std::to_string(alpha));
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be finite and >= 0, got " +
                                std::to_string(epsilon));
  }
  return EmaState{mu, var, alpha, epsilon, 0};
}

EmaState ema_update(const EmaState& state, double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("ema_update: non-finite value " +
                                std::to_string(value));
  }
  EmaState next = state;
  next.mu = state.alpha * state.mu + (1.0 - state.alpha) * value;
  const double dev = value - next.mu;  // deviation from the NEW mean
  next.var = state.alpha * state.var + (1.0 - state.alpha) * dev * dev;
  next.steps_seen = state.steps_seen + 1;
  return next;
}

double z_score(const EmaState& state, double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("z_score: non-finite value " +
                                std::to_string(value));
  }
  return (value - state.mu) / (std::sqrt(state.var) + state.epsilon);
}

WarmupBuffer::WarmupBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw std::invalid_argument("warm-up capacity must be positive");
  }
  norms_.reserve(capacity);
}

void WarmupBuffer::push(double norm) {
  if (!std::isfinite(norm) || norm < 0.0) {
    throw std::invalid_argument("warm-up norm must be finite and >= 0, got " +
                                std::to_string(norm));
  }
  if (full()) {
    throw std::logic_error("warm-up buffer already holds " +
                           std::to_string(capacity_) + " norms");
  }
  norms_.push_back(norm);
}

EmaState WarmupBuffer::finalize(double alpha, double epsilon) const {
  if (norms_.size() != capacity_) {
    throw std::logic_error("warm-up finalization needs exactly " +
                           std::to_string(capacity_) + " norms, have " +
                           std::to_string(norms_.size()));
  }
  double sum = 0.0;
  for (double v : norms_) sum += v;
  const double mu = sum / static_cast<double>(capacity_);
  double sq = 0.0;
  for (double v : norms_) sq += (v - mu) * (v - mu);
  const double var = sq / static_cast<double>(capacity_);
  EmaState state = make_ema_state(mu, var, alpha, epsilon);
  state.steps_seen = capacity_;
  return state;
}

// Acklam's rational approximation to the inverse normal CDF.
// Peak absolute error ~1.15e-9 over (0,1).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie in (0,1), got " +
                                std::to_string(p));
  }

  static constexpr double a[6] = {
      -3.969683028665376e+01, 2.209460984245205e+02,  -2.759285104469687e+02,
      1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {
      -5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[6] = {
      -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};

  constexpr double p_low = 0.02425;
  constexpr double p_high = 1.0 - p_low;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > p_high) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

NormalityResult normality_diagnostic(std::span<const double> window) {
  const std::size_t n = window.size();
  if (n < 8) {
    throw std::invalid_argument("normality_diagnostic: window must hold >= 8 "
                                "values, got " +
                                std::to_string(n));
  }
  double sum = 0.0;
  for (double v : window) {
    check_finite(v, "window value");
    sum += v;
  }
  const double mean = sum / static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : window) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0) {
    throw std::invalid_argument(
        "normality_diagnostic: zero-variance window, statistic undefined");
  }
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  const double jb = static_cast<double>(n) / 6.0 *
                    (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);
  return NormalityResult{jb, std::exp(-jb / 2.0)};
}

}  // namespace zclip
