#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "zclip/stats.hpp"

namespace zclip {

/// How a detected spike's z-score is remapped before rescaling.
enum class ZClipMode { to_mean, to_max, reciprocal };

struct NoClip {};

struct FixedClip {
  double max_norm = 1.0;  // c > 0
};

struct AutoClip {
  double percentile = 0.99;                // strictly in (0,1)
  std::optional<std::size_t> history_cap;  // unbounded when absent
};

struct ZClip {
  ZClipMode mode = ZClipMode::reciprocal;
  double z_threshold = 2.5;  // > 0
  double alpha = kDefaultAlpha;
  std::size_t warmup_steps = kDefaultWarmupSteps;
  double epsilon = kDefaultEpsilon;
  /// Set when the threshold came from a percentile; z_threshold then holds
  /// normal_quantile(percentile), resolved exactly once, here.
  std::optional<double> percentile;

  static ZClip from_percentile(double p,
                               ZClipMode mode = ZClipMode::reciprocal,
                               double alpha = kDefaultAlpha,
                               std::size_t warmup_steps = kDefaultWarmupSteps,
                               double epsilon = kDefaultEpsilon);
};

using ClipPolicy = std::variant<NoClip, FixedClip, AutoClip, ZClip>;

/// Throws std::invalid_argument naming the offending field.
void validate(const ClipPolicy& policy);

/// Canonical spec string, e.g. "fixed:1", "autoclip:0.99:4096",
/// "zclip:reciprocal:2.5:0.97". Percentile-built ZClip prints "99%".
std::string to_string(const ClipPolicy& policy);
std::string to_string(ZClipMode mode);

/// One step of any policy. mu/sigma/z are the statistics the decision was
/// made against; NaN while warming up and for policies that track none.
struct StepRecord {
  std::uint64_t step = 0;
  double raw_norm = 0.0;
  double clipped_norm = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double z = 0.0;
  bool was_clipped = false;
  double update_value = 0.0;  // value fed to the statistics update
  bool valid = true;          // false: non-finite input, statistics untouched
};

/// Spike z-score adjustment. Defined for z > z_threshold:
///   to_mean -> 0, to_max -> z_threshold, reciprocal -> z_threshold^2 / z.
double xi(double z, double z_threshold, ZClipMode mode);

/// Post-clip target norm mu + xi(z) * sigma for a spike; callers guarantee
/// z > z_threshold.
double zclip_target(double mu, double sigma, double z, double z_threshold,
                    ZClipMode mode);

/// Percentile of the pre-clipping norm history by linear interpolation
/// between closest order statistics. History must be non-empty.
double autoclip_threshold(std::span<const double> history, double percentile);

/// Scalar the engine multiplies the gradient by: clipped/raw when clipping
/// triggered, 1 otherwise, 0 for invalid records.
double rescale_factor(const StepRecord& record);

/// Streaming state for one training run under one policy. Sequential use
/// only; independent instances may run in parallel.
class Clipper {
 public:
  explicit Clipper(ClipPolicy policy);

  /// ZClip instance with pre-finalized statistics (skips warm-up).
  static Clipper with_state(const ZClip& config, const EmaState& state);

  StepRecord step(double raw_norm);
  std::vector<StepRecord> run(std::span<const double> norms);

  const ClipPolicy& policy() const { return policy_; }
  /// Current EMA statistics; empty for non-ZClip policies and during warm-up.
  const std::optional<EmaState>& stats() const { return stats_; }
  std::uint64_t steps_taken() const { return next_step_; }

 private:
  StepRecord step_zclip(const ZClip& cfg, double raw_norm, StepRecord rec);
  StepRecord step_autoclip(const AutoClip& cfg, double raw_norm,
                           StepRecord rec);

  ClipPolicy policy_;
  std::uint64_t next_step_ = 0;

  // zclip
  WarmupBuffer warmup_;
  std::optional<EmaState> stats_;

  // autoclip
  std::vector<double> sorted_history_;
  std::deque<double> arrival_order_;  // only tracked when history is capped
};

}  // namespace zclip
