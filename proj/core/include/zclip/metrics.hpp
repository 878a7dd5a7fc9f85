#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zclip/policies.hpp"

namespace zclip::metrics {

struct WindowDiagnostic {
  std::size_t start = 0;  // [start, end)
  std::size_t end = 0;
  double statistic = 0.0;
  double p_like = 0.0;
  bool ok = false;  // false: statistic undefined (zero-variance window)
};

struct CompareOptions {
  std::size_t clip_window = 1000;      // trailing window for the clip curve
  std::size_t normality_window = 135;  // sliding-window length
  std::size_t normality_stride = 0;    // 0: non-overlapping (= window)
  // Reference statistics pass used to count spike excursions for policies
  // that do not track their own (none / fixed / autoclip).
  double reference_alpha = kDefaultAlpha;
  double reference_z_threshold = 2.5;
  std::size_t reference_warmup = kDefaultWarmupSteps;
  double reference_epsilon = kDefaultEpsilon;
};

struct RunSummary {
  std::string policy;
  std::size_t spike_count = 0;  // z-excursion events on post-clip norms
  double clip_fraction = 0.0;
  std::vector<std::pair<std::uint64_t, double>> clip_fraction_curve;
  std::vector<double> mu_curve;     // NaN while warming up
  std::vector<double> sigma_curve;  // NaN while warming up
  std::optional<double> final_loss;
  std::vector<WindowDiagnostic> normality_windows;
};

/// Trailing-window fraction of clipped steps, one point per record. Counts
/// are integral, so each value is exactly count/window.
std::vector<std::pair<std::uint64_t, double>> clip_fraction_curve(
    std::span<const StepRecord> records, std::size_t window);

/// Spike-excursion events in a norm sequence: a fresh statistics pass
/// (reciprocal clipping with the given parameters) is run over it and
/// consecutive z > z_threshold steps merge into one event.
std::size_t trace_spike_count(std::span<const double> norms, double alpha,
                              double z_threshold, std::size_t warmup,
                              double epsilon);

/// normality_diagnostic applied per window; zero-variance windows come back
/// with ok == false instead of failing the whole sweep.
std::vector<WindowDiagnostic> sliding_normality(std::span<const double> stream,
                                                std::size_t window = 135,
                                                std::size_t stride = 0);

RunSummary summarize(const ClipPolicy& policy, std::span<const double> stream,
                     const CompareOptions& options = {});

/// Runs every policy over the identical stream; summaries in input order.
std::vector<RunSummary> compare(std::span<const ClipPolicy> policies,
                                std::span<const double> stream,
                                const CompareOptions& options = {});

}  // namespace zclip::metrics
