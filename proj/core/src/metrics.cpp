#include "zclip/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace zclip::metrics {

std::vector<std::pair<std::uint64_t, double>> clip_fraction_curve(
    std::span<const StepRecord> records, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  if (records.empty()) throw std::invalid_argument("no records");

  std::vector<std::pair<std::uint64_t, double>> curve;
  curve.reserve(records.size());
  std::size_t in_window = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    in_window += records[i].was_clipped ? 1 : 0;
    if (i >= window && records[i - window].was_clipped) --in_window;
    const std::size_t width = std::min(i + 1, window);
    curve.emplace_back(records[i].step, static_cast<double>(in_window) /
                                            static_cast<double>(width));
  }
  return curve;
}

std::size_t trace_spike_count(std::span<const double> norms, double alpha,
                              double z_threshold, std::size_t warmup,
                              double epsilon) {
  ZClip reference;
  reference.mode = ZClipMode::reciprocal;
  reference.z_threshold = z_threshold;
  reference.alpha = alpha;
  reference.warmup_steps = warmup;
  reference.epsilon = epsilon;
  Clipper pass{ClipPolicy{reference}};

  std::size_t events = 0;
  bool in_event = false;
  for (double norm : norms) {
    const StepRecord rec = pass.step(norm);
    const bool flagged = rec.valid && rec.was_clipped;
    if (flagged && !in_event) ++events;
    in_event = flagged;
  }
  return events;
}

std::vector<WindowDiagnostic> sliding_normality(std::span<const double> stream,
                                                std::size_t window,
                                                std::size_t stride) {
  if (window < 8) throw std::invalid_argument("window must be >= 8");
  if (stream.size() < window) {
    throw std::invalid_argument("stream shorter than the window");
  }
  if (stride == 0) stride = window;

  std::vector<WindowDiagnostic> out;
  for (std::size_t start = 0; start + window <= stream.size();
       start += stride) {
    WindowDiagnostic diag;
    diag.start = start;
    diag.end = start + window;
    try {
      const NormalityResult r =
          normality_diagnostic(stream.subspan(start, window));
      diag.statistic = r.statistic;
      diag.p_like = r.p_like;
      diag.ok = true;
    } catch (const std::invalid_argument&) {
      diag.ok = false;
    }
    out.push_back(diag);
  }
  return out;
}

RunSummary summarize(const ClipPolicy& policy, std::span<const double> stream,
                     const CompareOptions& options) {
  if (stream.empty()) throw std::invalid_argument("empty stream");
  validate(policy);

  RunSummary summary;
  summary.policy = to_string(policy);

  Clipper clipper(policy);
  std::vector<StepRecord> records = clipper.run(stream);

  std::vector<double> post;
  post.reserve(records.size());
  std::size_t clipped = 0;
  for (const StepRecord& r : records) {
    post.push_back(r.clipped_norm);
    clipped += r.was_clipped ? 1 : 0;
    summary.mu_curve.push_back(r.mu);
    summary.sigma_curve.push_back(r.sigma);
  }
  summary.clip_fraction =
      static_cast<double>(clipped) / static_cast<double>(records.size());
  summary.clip_fraction_curve = clip_fraction_curve(records, options.clip_window);

  // ZClip carries its own statistics; baselines borrow the reference pass.
  double alpha = options.reference_alpha;
  double z_threshold = options.reference_z_threshold;
  std::size_t warmup = options.reference_warmup;
  double epsilon = options.reference_epsilon;
  if (const ZClip* z = std::get_if<ZClip>(&policy)) {
    alpha = z->alpha;
    z_threshold = z->z_threshold;
    warmup = z->warmup_steps;
    epsilon = z->epsilon;
  }
  summary.spike_count =
      trace_spike_count(post, alpha, z_threshold, warmup, epsilon);

  if (stream.size() >= options.normality_window) {
    summary.normality_windows = sliding_normality(
        post, options.normality_window, options.normality_stride);
  }
  return summary;
}

std::vector<RunSummary> compare(std::span<const ClipPolicy> policies,
                                std::span<const double> stream,
                                const CompareOptions& options) {
  std::vector<RunSummary> out;
  out.reserve(policies.size());
  for (const ClipPolicy& policy : policies) {
    try {
      out.push_back(summarize(policy, stream, options));
    } catch (const std::exception& e) {
      throw std::runtime_error("policy " + to_string(policy) + ": " +
                               e.what());
    }
  }
  return out;
}

}  // namespace zclip::metrics
