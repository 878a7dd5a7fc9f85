#include "zclip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "zclip/rng.hpp"

namespace zclip::synth {

void validate(const StreamSpec& spec) {
  if (spec.length == 0) {
    throw std::invalid_argument("stream length must be > 0");
  }
  if (!(spec.mean0 > 0.0) || !std::isfinite(spec.mean0)) {
    throw std::invalid_argument("mean0 must be finite and > 0");
  }
  if (!std::isfinite(spec.mean_final) || spec.mean_final < 0.0) {
    throw std::invalid_argument("mean_final must be finite and >= 0");
  }
  if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) {
    throw std::invalid_argument("noise_sd must be finite and >= 0");
  }
  if (spec.decay != MeanDecay::none &&
      (!(spec.decay_param > 0.0) || !std::isfinite(spec.decay_param))) {
    throw std::invalid_argument("decay_param must be finite and > 0");
  }
  for (const SpikeSpec& s : spec.spikes) {
    if (s.multiplier.has_value() == s.sigma_count.has_value()) {
      throw std::invalid_argument(
          "spike needs exactly one of multiplier / sigma_count");
    }
    if (s.multiplier && !(*s.multiplier > 1.0)) {
      throw std::invalid_argument("spike multiplier must be > 1");
    }
    if (s.sigma_count && !(*s.sigma_count > 0.0)) {
      throw std::invalid_argument("spike sigma_count must be > 0");
    }
    if (!s.at && !(s.rate > 0.0 && s.rate <= 1.0)) {
      throw std::invalid_argument(
          "probabilistic spike rate must lie in (0,1]");
    }
    if (s.at && *s.at >= spec.length) {
      throw std::invalid_argument("scheduled spike step " +
                                  std::to_string(*s.at) +
                                  " is outside the stream");
    }
  }
  if (spec.regime == Regime::saturated) {
    if (!spec.plateau_at || *spec.plateau_at >= spec.length) {
      throw std::invalid_argument(
          "saturated regime needs plateau_at inside the stream");
    }
    if (!(spec.plateau > 0.0) || !std::isfinite(spec.plateau)) {
      throw std::invalid_argument("plateau must be finite and > 0");
    }
  }
}

double mean_at(const StreamSpec& spec, std::uint64_t step) {
  if (spec.regime == Regime::saturated && spec.plateau_at &&
      step >= *spec.plateau_at) {
    return spec.plateau;
  }
  const double t = static_cast<double>(step);
  switch (spec.decay) {
    case MeanDecay::none:
      return spec.mean0;
    case MeanDecay::exponential:
      return spec.mean_final +
             (spec.mean0 - spec.mean_final) * std::exp(-spec.decay_param * t);
    case MeanDecay::linear:
      return std::max(spec.mean_final, spec.mean0 - spec.decay_param * t);
  }
  return spec.mean0;
}

GeneratedStream generate(const StreamSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  GeneratedStream out;
  out.norms.reserve(spec.length);

  for (std::uint64_t t = 0; t < spec.length; ++t) {
    const double mean = mean_at(spec, t);

    double value;
    if (spec.noise_sd == 0.0) {
      value = mean;
    } else if (spec.noise == NoiseKind::gaussian) {
      value = mean + spec.noise_sd * rng.normal();
    } else {
      // Mean-preserving lognormal with log-sd = noise_sd.
      value = mean * std::exp(spec.noise_sd * rng.normal() -
                              0.5 * spec.noise_sd * spec.noise_sd);
    }

    // Spike sources are evaluated every step in declaration order so the
    // RNG consumption pattern depends only on the spec.
    for (const SpikeSpec& s : spec.spikes) {
      bool fires = false;
      if (s.at) {
        fires = *s.at == t;
      } else {
        fires = rng.uniform01() < s.rate;
      }
      if (fires) {
        value = s.multiplier ? mean * *s.multiplier
                             : mean + *s.sigma_count * spec.noise_sd;
      }
    }

    if (value < 0.0) {
      value = 0.0;
      ++out.clamped;
    }
    out.norms.push_back(value);
  }
  return out;
}

}  // namespace zclip::synth
