#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zclip/policies.hpp"

namespace zclip::trainer {

/// Row-major feature block (count x 2) with one class label per row.
struct Batch {
  std::vector<double> features;
  std::vector<int> labels;
  std::size_t count = 0;
};

/// Two-class Gaussian mixture in the plane, separable up to noise.
struct Dataset {
  Batch train;
  Batch probe;  // held-out batch used for the per-step loss curve
};

Dataset make_dataset(std::size_t train_samples, std::size_t probe_samples,
                     std::uint64_t seed);

/// Feed-forward classifier with tanh hidden layers and two softmax logits.
/// Parameters live in one flat vector (per layer: weights row-major, then
/// biases) so individual coordinates can be perturbed in tests.
class ToyModel {
 public:
  static constexpr std::size_t kInputDim = 2;
  static constexpr std::size_t kClasses = 2;

  ToyModel(std::vector<std::size_t> hidden, std::uint64_t seed);

  std::size_t parameter_count() const { return params_.size(); }
  double parameter(std::size_t i) const { return params_.at(i); }
  void set_parameter(std::size_t i, double value) { params_.at(i) = value; }
  bool parameters_finite() const;

  std::size_t layer_count() const { return dims_.size() - 1; }
  /// [first, last) slice of the flat vector owned by one layer.
  std::pair<std::size_t, std::size_t> layer_range(std::size_t layer) const;

  /// Mean cross-entropy over the batch.
  double loss(const Batch& batch) const;
  /// Loss plus the analytic gradient, laid out like the parameter vector.
  double loss_and_gradient(const Batch& batch, std::vector<double>& grad) const;

  /// params += scale * direction
  void add_scaled(std::span<const double> direction, double scale);

 private:
  double forward_backward(const Batch& batch, std::vector<double>* grad) const;

  std::vector<std::size_t> dims_;  // {2, hidden..., 2}
  std::vector<double> params_;
};

enum class ScheduleKind { constant, warmup_cosine };

struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  std::size_t warmup_steps = 0;
  double end_fraction = 0.10;  // floor of the cosine tail
};

struct SpikeInjection {
  double rate = 0.0;                       // per-step batch-corruption odds
  double label_corruption_fraction = 0.0;  // share of labels flipped
};

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  Schedule schedule;
  std::size_t steps = 1000;
  std::size_t batch_size = 64;
  ClipPolicy policy = NoClip{};
  SpikeInjection spike_injection;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t train_samples = 4096;
  std::size_t probe_samples = 256;
  std::size_t spike_window = 100;  // loss-spike detector window
  double spike_k = 10.0;           // MAD multiples above the window median
};

struct TrainReport {
  std::string policy_label;
  std::vector<double> loss_curve;  // probe loss after each update
  std::vector<double> grad_norm_pre;
  std::vector<double> grad_norm_post;
  std::vector<StepRecord> records;
  std::size_t spike_count = 0;
  bool diverged = false;
  double clip_fraction = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

double learning_rate_at(const TrainConfig& config, std::size_t step);

/// Full loop: forward, analytic backward, global-norm clipping via the
/// policy, momentum-SGD update. Halts on non-finite loss or parameters and
/// flags the run as diverged; a final loss above 10x the initial probe loss
/// also counts as divergence.
TrainReport train(const TrainConfig& config);

/// Counts excursions where the loss exceeds the trailing-window median by
/// more than k window-MADs; consecutive flagged steps merge into one event.
std::size_t detect_loss_spikes(std::span<const double> loss_curve,
                               std::size_t window = 100, double k = 10.0);

}  // namespace zclip::trainer
