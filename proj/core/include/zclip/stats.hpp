#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace zclip {

inline constexpr double kDefaultAlpha = 0.97;
inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr std::size_t kDefaultWarmupSteps = 25;

/// Exponentially smoothed mean/variance of a gradient-norm stream.
///
/// `epsilon` is added to sqrt(var) when forming z-scores, so a zero-variance
/// state still yields finite (large) scores. `epsilon == 0` is permitted for
/// exact scale-invariance checks.
struct EmaState {
  double mu = 0.0;
  double var = 0.0;
  double alpha = kDefaultAlpha;
  double epsilon = kDefaultEpsilon;
  std::uint64_t steps_seen = 0;
};

/// Validating constructor: alpha strictly in (0,1), epsilon >= 0,
/// mu finite, var finite and >= 0. Throws std::invalid_argument.
EmaState make_ema_state(double mu, double var, double alpha,
                        double epsilon = kDefaultEpsilon);

/// One smoothing step. The mean moves first; the variance is measured
/// against the updated mean:
///   mu'  = alpha * mu  + (1 - alpha) * value
///   var' = alpha * var + (1 - alpha) * (value - mu')^2
/// Rejects non-finite values without touching the state.
EmaState ema_update(const EmaState& state, double value);

/// (value - mu) / (sqrt(var) + epsilon). May be negative.
double z_score(const EmaState& state, double value);

/// Collects the first N raw gradient norms verbatim; finalization turns them
/// into the initial EmaState (sample mean, population variance).
class WarmupBuffer {
 public:
  explicit WarmupBuffer(std::size_t capacity = kDefaultWarmupSteps);

  /// Rejects non-finite or negative norms and pushes beyond capacity.
  void push(double norm);

  bool full() const { return norms_.size() == capacity_; }
  std::size_t size() const { return norms_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::span<const double> norms() const { return norms_; }

  /// Only valid at exactly `capacity` entries. Variance uses the 1/N
  /// normalization. steps_seen of the result equals the capacity.
  EmaState finalize(double alpha, double epsilon = kDefaultEpsilon) const;

 private:
  std::size_t capacity_;
  std::vector<double> norms_;
};

/// Inverse CDF of the standard normal, for p strictly in (0,1).
/// Rational minimax approximation, |absolute error| < 1.2e-9.
double normal_quantile(double p);

struct NormalityResult {
  double statistic = 0.0;  // Jarque-Bera: n/6 * (S^2 + (K-3)^2 / 4)
  double p_like = 1.0;     // chi-square(2) tail probability, exp(-statistic/2)
};

/// Moment-based normality check over a window of at least 8 values.
/// Zero-variance windows are rejected (skewness/kurtosis undefined).
NormalityResult normality_diagnostic(std::span<const double> window);

}  // namespace zclip
