#include "zclip/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fmt.hpp"

namespace zclip {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Linear interpolation between closest order statistics on sorted data.
double percentile_sorted(std::span<const double> sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

ZClip ZClip::from_percentile(double p, ZClipMode mode, double alpha,
                             std::size_t warmup_steps, double epsilon) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument(
        "zclip percentile must lie strictly in (0,1), got " +
        detail::fmt_double(p));
  }
  ZClip cfg;
  cfg.mode = mode;
  cfg.z_threshold = normal_quantile(p);  // resolved exactly once
  cfg.alpha = alpha;
  cfg.warmup_steps = warmup_steps;
  cfg.epsilon = epsilon;
  cfg.percentile = p;
  validate(ClipPolicy{cfg});
  return cfg;
}

void validate(const ClipPolicy& policy) {
  struct Visitor {
    void operator()(const NoClip&) const {}
    void operator()(const FixedClip& c) const {
      if (!(c.max_norm > 0.0) || !std::isfinite(c.max_norm)) {
        throw std::invalid_argument("fixed threshold c must be finite and > 0, got " +
                                    detail::fmt_double(c.max_norm));
      }
    }
    void operator()(const AutoClip& c) const {
      if (!(c.percentile > 0.0 && c.percentile < 1.0)) {
        throw std::invalid_argument(
            "autoclip percentile p must lie strictly in (0,1), got " +
            detail::fmt_double(c.percentile));
      }
      if (c.history_cap && *c.history_cap == 0) {
        throw std::invalid_argument("autoclip history cap must be >= 1");
      }
    }
    void operator()(const ZClip& c) const {
      if (!(c.z_threshold > 0.0) || !std::isfinite(c.z_threshold)) {
        throw std::invalid_argument(
            "zclip z_thres must be finite and > 0, got " +
            detail::fmt_double(c.z_threshold) +
            (c.percentile ? " (from percentile " +
                                detail::fmt_double(*c.percentile) + ")"
                          : ""));
      }
      if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
        throw std::invalid_argument(
            "zclip alpha must lie strictly in (0,1), got " +
            detail::fmt_double(c.alpha));
      }
      if (!(c.epsilon >= 0.0) || !std::isfinite(c.epsilon)) {
        throw std::invalid_argument(
            "zclip epsilon must be finite and >= 0, got " +
            detail::fmt_double(c.epsilon));
      }
      if (c.warmup_steps == 0) {
        throw std::invalid_argument("zclip warmup must be >= 1 step");
      }
      if (c.percentile && !(*c.percentile > 0.0 && *c.percentile < 1.0)) {
        throw std::invalid_argument(
            "zclip percentile must lie strictly in (0,1), got " +
            detail::fmt_double(*c.percentile));
      }
    }
  };
  std::visit(Visitor{}, policy);
}

std::string to_string(ZClipMode mode) {
  switch (mode) {
    case ZClipMode::to_mean: return "to_mean";
    case ZClipMode::to_max: return "to_max";
    case ZClipMode::reciprocal: return "reciprocal";
  }
  return "reciprocal";
}

std::string to_string(const ClipPolicy& policy) {
  struct Visitor {
    std::string operator()(const NoClip&) const { return "none"; }
    std::string operator()(const FixedClip& c) const {
      return "fixed:" + detail::fmt_double(c.max_norm);
    }
    std::string operator()(const AutoClip& c) const {
      std::string s = "autoclip:" + detail::fmt_double(c.percentile);
      if (c.history_cap) s += ":" + std::to_string(*c.history_cap);
      return s;
    }
    std::string operator()(const ZClip& c) const {
      std::string s = "zclip:" + to_string(c.mode) + ":";
      if (c.percentile) {
        s += detail::fmt_double(*c.percentile * 100.0) + "%";
      } else {
        s += detail::fmt_double(c.z_threshold);
      }
      s += ":" + detail::fmt_double(c.alpha);
      const bool warmup_default = c.warmup_steps == kDefaultWarmupSteps;
      const bool eps_default = c.epsilon == kDefaultEpsilon;
      if (!warmup_default || !eps_default) s += ":" + std::to_string(c.warmup_steps);
      if (!eps_default) s += ":" + detail::fmt_double(c.epsilon);
      return s;
    }
  };
  return std::visit(Visitor{}, policy);
}

double xi(double z, double z_threshold, ZClipMode mode) {
  switch (mode) {
    case ZClipMode::to_mean: return 0.0;
    case ZClipMode::to_max: return z_threshold;
    case ZClipMode::reciprocal: return z_threshold * z_threshold / z;
  }
  return 0.0;
}

double zclip_target(double mu, double sigma, double z, double z_threshold,
                    ZClipMode mode) {
  const double target = mu + xi(z, z_threshold, mode) * sigma;
  return std::max(target, 0.0);  // norms are nonnegative
}

double autoclip_threshold(std::span<const double> history, double percentile) {
  if (history.empty()) {
    throw std::invalid_argument("autoclip threshold needs a non-empty history");
  }
  if (!(percentile > 0.0 && percentile < 1.0)) {
    throw std::invalid_argument(
        "autoclip percentile p must lie strictly in (0,1), got " +
        detail::fmt_double(percentile));
  }
  std::vector<double> sorted(history.begin(), history.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, percentile);
}

double rescale_factor(const StepRecord& record) {
  if (!record.valid) return 0.0;
  if (!record.was_clipped || record.raw_norm == 0.0) return 1.0;
  return record.clipped_norm / record.raw_norm;
}

Clipper::Clipper(ClipPolicy policy)
    : policy_(std::move(policy)),
      warmup_(std::holds_alternative<ZClip>(policy_)
                  ? std::get<ZClip>(policy_).warmup_steps
                  : 1) {
  validate(policy_);
}

Clipper Clipper::with_state(const ZClip& config, const EmaState& state) {
  Clipper clipper{ClipPolicy{config}};
  EmaState s = make_ema_state(state.mu, state.var, config.alpha, config.epsilon);
  s.steps_seen = state.steps_seen;
  clipper.stats_ = s;
  return clipper;
}

StepRecord Clipper::step(double raw_norm) {
  StepRecord rec;
  rec.step = next_step_++;
  rec.raw_norm = raw_norm;
  rec.mu = rec.sigma = rec.z = kNan;

  if (!std::isfinite(raw_norm) || raw_norm < 0.0) {
    rec.valid = false;
    rec.clipped_norm = 0.0;
    rec.update_value = 0.0;
    return rec;
  }

  struct Visitor {
    Clipper& self;
    double raw;
    StepRecord rec;
    StepRecord operator()(const NoClip&) {
      rec.clipped_norm = raw;
      rec.update_value = raw;
      return rec;
    }
    StepRecord operator()(const FixedClip& cfg) {
      rec.was_clipped = raw > cfg.max_norm;
      rec.clipped_norm = rec.was_clipped ? cfg.max_norm : raw;
      rec.update_value = raw;  // baselines track no statistics
      return rec;
    }
    StepRecord operator()(const AutoClip& cfg) {
      return self.step_autoclip(cfg, raw, rec);
    }
    StepRecord operator()(const ZClip& cfg) {
      return self.step_zclip(cfg, raw, rec);
    }
  };
  return std::visit(Visitor{*this, raw_norm, rec}, policy_);
}

StepRecord Clipper::step_autoclip(const AutoClip& cfg, double raw_norm,
                                  StepRecord rec) {
  // The history records pre-clipping norms, current step included.
  sorted_history_.insert(
      std::upper_bound(sorted_history_.begin(), sorted_history_.end(),
                       raw_norm),
      raw_norm);
  if (cfg.history_cap) {
    arrival_order_.push_back(raw_norm);
    if (arrival_order_.size() > *cfg.history_cap) {
      const double oldest = arrival_order_.front();
      arrival_order_.pop_front();
      sorted_history_.erase(std::lower_bound(sorted_history_.begin(),
                                             sorted_history_.end(), oldest));
    }
  }
  const double threshold = percentile_sorted(sorted_history_, cfg.percentile);
  rec.was_clipped = raw_norm > threshold;
  rec.clipped_norm = rec.was_clipped ? threshold : raw_norm;
  rec.update_value = raw_norm;
  return rec;
}

StepRecord Clipper::step_zclip(const ZClip& cfg, double raw_norm,
                               StepRecord rec) {
  if (!stats_) {
    // Warm-up: collect unmodified norms, no clipping.
    warmup_.push(raw_norm);
    rec.clipped_norm = raw_norm;
    rec.update_value = raw_norm;
    if (warmup_.full()) {
      stats_ = warmup_.finalize(cfg.alpha, cfg.epsilon);
    }
    return rec;
  }

  const EmaState& s = *stats_;
  rec.mu = s.mu;
  rec.sigma = std::sqrt(s.var);
  rec.z = z_score(s, raw_norm);

  if (rec.z > cfg.z_threshold) {
    rec.was_clipped = true;
    rec.clipped_norm =
        zclip_target(s.mu, rec.sigma, rec.z, cfg.z_threshold, cfg.mode);
  } else {
    rec.clipped_norm = raw_norm;
  }
  // Spike steps feed the clipped norm back into the statistics.
  rec.update_value = rec.was_clipped ? rec.clipped_norm : raw_norm;
  stats_ = ema_update(s, rec.update_value);
  return rec;
}

std::vector<StepRecord> Clipper::run(std::span<const double> norms) {
  std::vector<StepRecord> records;
  records.reserve(norms.size());
  for (double n : norms) records.push_back(step(n));
  return records;
}

}  // namespace zclip
