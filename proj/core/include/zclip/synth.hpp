#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace zclip::synth {

enum class Regime { stationary, drifting, spiky, saturated };
enum class MeanDecay { none, exponential, linear };
enum class NoiseKind { gaussian, lognormal };

/// One spike source. Scheduled (`at` set) or probabilistic (Bernoulli(rate)
/// per step). The injected value replaces the step's noise draw:
/// mean * multiplier, or mean + sigma_count * noise_sd.
struct SpikeSpec {
  std::optional<std::uint64_t> at;
  double rate = 0.0;
  std::optional<double> multiplier;
  std::optional<double> sigma_count;
};

struct StreamSpec {
  std::size_t length = 0;
  std::uint64_t seed = 0;
  Regime regime = Regime::stationary;

  // Base level: mean0 at step 0, drifting toward mean_final under `decay`.
  double mean0 = 1.0;
  double mean_final = 1.0;
  MeanDecay decay = MeanDecay::none;
  double decay_param = 0.0;  // exponential rate, or linear drop per step

  double noise_sd = 0.0;
  NoiseKind noise = NoiseKind::gaussian;

  std::vector<SpikeSpec> spikes;

  // Saturated regime: the mean jumps to `plateau` at `plateau_at` and stays.
  std::optional<std::uint64_t> plateau_at;
  double plateau = 0.0;
};

struct GeneratedStream {
  std::vector<double> norms;
  std::size_t clamped = 0;  // negative draws clamped to zero
};

/// Throws std::invalid_argument naming the offending field.
void validate(const StreamSpec& spec);

/// Base mean at a step, before noise and spikes.
double mean_at(const StreamSpec& spec, std::uint64_t step);

/// Deterministic in (spec, seed). All norms finite and >= 0.
GeneratedStream generate(const StreamSpec& spec);

}  // namespace zclip::synth
