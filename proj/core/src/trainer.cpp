#include "zclip/trainer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "zclip/rng.hpp"

namespace zclip::trainer {

namespace {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

constexpr double kClass0Mean[2] = {-1.2, -0.8};
constexpr double kClass1Mean[2] = {1.2, 0.8};
constexpr double kClassSd = 0.7;

// Smooth, unbounded hidden nonlinearity: x * Phi(x). Unlike tanh it does not
// saturate, so runaway weight growth shows up as genuine divergence.
double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi /
                     std::numbers::sqrt2;
  return cdf + x * pdf;
}

Batch sample_mixture(std::size_t count, Rng& rng) {
  Batch batch;
  batch.count = count;
  batch.features.resize(count * ToyModel::kInputDim);
  batch.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(rng.below(2));
    const double* mean = label == 0 ? kClass0Mean : kClass1Mean;
    batch.labels[i] = label;
    batch.features[2 * i] = mean[0] + kClassSd * rng.normal();
    batch.features[2 * i + 1] = mean[1] + kClassSd * rng.normal();
  }
  return batch;
}

double median_of(std::vector<double>& scratch) {
  const std::size_t n = scratch.size();
  const std::size_t mid = n / 2;
  std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
  double hi = scratch[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(scratch.begin(), scratch.begin() + mid - 1,
                   scratch.begin() + mid);
  return 0.5 * (scratch[mid - 1] + hi);
}

}  // namespace

Dataset make_dataset(std::size_t train_samples, std::size_t probe_samples,
                     std::uint64_t seed) {
  if (train_samples == 0 || probe_samples == 0) {
    throw std::invalid_argument("dataset sizes must be positive");
  }
  Rng rng(seed);
  Dataset ds;
  ds.train = sample_mixture(train_samples, rng);
  ds.probe = sample_mixture(probe_samples, rng);
  return ds;
}

ToyModel::ToyModel(std::vector<std::size_t> hidden, std::uint64_t seed) {
  dims_.push_back(kInputDim);
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden width must be positive");
    dims_.push_back(h);
  }
  dims_.push_back(kClasses);

  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_.resize(total);

  Rng rng(seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const std::size_t fan_in = dims_[l];
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < dims_[l + 1] * fan_in; ++i) {
      params_[offset++] = sd * rng.normal();
    }
    offset += dims_[l + 1];  // biases start at zero
  }
}

std::pair<std::size_t, std::size_t> ToyModel::layer_range(
    std::size_t layer) const {
  if (layer >= layer_count()) throw std::out_of_range("layer index");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  return {offset, offset + dims_[layer + 1] * dims_[layer] + dims_[layer + 1]};
}

bool ToyModel::parameters_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](double v) { return std::isfinite(v); });
}

void ToyModel::add_scaled(std::span<const double> direction, double scale) {
  if (direction.size() != params_.size()) {
    throw std::invalid_argument("direction length does not match parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i] += scale * direction[i];
  }
}

double ToyModel::loss(const Batch& batch) const {
  return forward_backward(batch, nullptr);
}

double ToyModel::loss_and_gradient(const Batch& batch,
                                   std::vector<double>& grad) const {
  return forward_backward(batch, &grad);
}

double ToyModel::forward_backward(const Batch& batch,
                                  std::vector<double>* grad) const {
  const std::size_t n = batch.count;
  if (n == 0 || batch.features.size() != n * kInputDim ||
      batch.labels.size() != n) {
    throw std::invalid_argument("malformed batch");
  }
  const bool want_grad = grad != nullptr;

  const std::size_t layers = layer_count();
  std::vector<Matrix> activations(layers + 1);
  std::vector<Matrix> preacts(layers);  // needed for the GELU derivative
  activations[0] = ConstMatrixMap(batch.features.data(),
                                  static_cast<Eigen::Index>(n), kInputDim);

  std::vector<std::size_t> offsets(layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    const auto rows = static_cast<Eigen::Index>(dims_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(dims_[l]);
    ConstMatrixMap w(params_.data() + offset, rows, cols);
    ConstVectorMap b(params_.data() + offset + dims_[l + 1] * dims_[l], rows);
    offset += dims_[l + 1] * dims_[l] + dims_[l + 1];

    Matrix z = activations[l] * w.transpose();
    z.rowwise() += b.transpose();
    if (l + 1 == layers) {
      activations[l + 1] = std::move(z);
    } else {
      activations[l + 1] = z.unaryExpr(&gelu);
      preacts[l] = std::move(z);
    }
  }

  // Stable softmax cross-entropy on the two logits.
  const Matrix& logits = activations[layers];
  Matrix dlogits(logits.rows(), logits.cols());
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double m = logits.row(row).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      denom += std::exp(logits(row, c) - m);
    }
    const double lse = m + std::log(denom);
    loss_sum += lse - logits(row, batch.labels[i]);
    if (want_grad) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        dlogits(row, c) = std::exp(logits(row, c) - lse);
      }
      dlogits(row, batch.labels[i]) -= 1.0;
    }
  }
  const double mean_loss = loss_sum / static_cast<double>(n);
  if (!want_grad) return mean_loss;

  grad->assign(params_.size(), 0.0);
  Matrix delta = dlogits / static_cast<double>(n);
  for (std::size_t l = layers; l-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(dims_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(dims_[l]);
    MatrixMap dw(grad->data() + offsets[l], rows, cols);
    VectorMap db(grad->data() + offsets[l] + dims_[l + 1] * dims_[l], rows);
    dw = delta.transpose() * activations[l];
    db = delta.colwise().sum().transpose();
    if (l > 0) {
      ConstMatrixMap w(params_.data() + offsets[l], rows, cols);
      Matrix dact = delta * w;
      delta = dact.array() * preacts[l - 1].unaryExpr(&gelu_derivative).array();
    }
  }
  return mean_loss;
}

double learning_rate_at(const TrainConfig& config, std::size_t step) {
  const double lr = config.learning_rate;
  if (config.schedule.kind == ScheduleKind::constant) return lr;
  const std::size_t warmup = config.schedule.warmup_steps;
  if (step < warmup) {
    return lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const std::size_t decay_len = config.steps > warmup ? config.steps - warmup : 1;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(decay_len);
  const double f = config.schedule.end_fraction;
  return lr * (f + (1.0 - f) * 0.5 *
                       (1.0 + std::cos(std::numbers::pi *
                                       std::min(progress, 1.0))));
}

namespace {

void validate(const TrainConfig& config) {
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and > 0");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0,1)");
  }
  if (config.steps == 0) throw std::invalid_argument("steps must be > 0");
  if (config.batch_size == 0) {
    throw std::invalid_argument("batch_size must be > 0");
  }
  if (config.schedule.kind == ScheduleKind::warmup_cosine) {
    if (config.schedule.warmup_steps == 0 ||
        config.schedule.warmup_steps > config.steps) {
      throw std::invalid_argument(
          "schedule warmup_steps must lie in [1, steps]");
    }
    if (!(config.schedule.end_fraction >= 0.0 &&
          config.schedule.end_fraction <= 1.0)) {
      throw std::invalid_argument("schedule end_fraction must lie in [0,1]");
    }
  }
  if (!(config.spike_injection.rate >= 0.0 &&
        config.spike_injection.rate <= 1.0)) {
    throw std::invalid_argument("spike injection rate must lie in [0,1]");
  }
  if (!(config.spike_injection.label_corruption_fraction >= 0.0 &&
        config.spike_injection.label_corruption_fraction <= 1.0)) {
    throw std::invalid_argument("label_corruption_fraction must lie in [0,1]");
  }
  zclip::validate(config.policy);
}

}  // namespace

TrainReport train(const TrainConfig& config) {
  validate(config);

  const Dataset dataset =
      make_dataset(config.train_samples, config.probe_samples, config.seed);
  ToyModel model(config.hidden, config.seed + 1);
  Rng loop_rng(config.seed + 2);
  Clipper clipper(config.policy);

  TrainReport report;
  report.policy_label = to_string(config.policy);
  report.initial_loss = model.loss(dataset.probe);
  report.loss_curve.reserve(config.steps);
  report.grad_norm_pre.reserve(config.steps);
  report.grad_norm_post.reserve(config.steps);
  report.records.reserve(config.steps);

  std::vector<double> grad(model.parameter_count());
  std::vector<double> velocity(model.parameter_count(), 0.0);
  Batch batch;
  batch.count = config.batch_size;
  batch.features.resize(config.batch_size * ToyModel::kInputDim);
  batch.labels.resize(config.batch_size);

  const std::size_t corrupt_count = static_cast<std::size_t>(
      std::llround(config.spike_injection.label_corruption_fraction *
                   static_cast<double>(config.batch_size)));

  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      const std::size_t pick = loop_rng.below(dataset.train.count);
      batch.features[2 * i] = dataset.train.features[2 * pick];
      batch.features[2 * i + 1] = dataset.train.features[2 * pick + 1];
      batch.labels[i] = dataset.train.labels[pick];
    }
    if (config.spike_injection.rate > 0.0 &&
        loop_rng.uniform01() < config.spike_injection.rate) {
      for (std::size_t i = 0; i < corrupt_count; ++i) {
        batch.labels[i] ^= 1;
      }
    }

    model.loss_and_gradient(batch, grad);

    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double raw_norm = std::sqrt(sq);

    const StepRecord record = clipper.step(raw_norm);
    report.records.push_back(record);
    report.grad_norm_pre.push_back(raw_norm);
    report.grad_norm_post.push_back(record.clipped_norm);
    if (!record.valid) {
      report.diverged = true;  // non-finite gradient norm
      break;
    }

    const double scale = rescale_factor(record);
    if (scale != 1.0) {
      for (double& g : grad) g *= scale;
    }
    for (std::size_t i = 0; i < velocity.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] + grad[i];
    }
    model.add_scaled(velocity, -learning_rate_at(config, step));

    const double probe_loss = model.loss(dataset.probe);
    report.loss_curve.push_back(probe_loss);
    if (!std::isfinite(probe_loss) || !model.parameters_finite()) {
      report.diverged = true;
      break;
    }
  }

  report.final_loss =
      report.loss_curve.empty() ? report.initial_loss : report.loss_curve.back();
  if (!std::isfinite(report.final_loss) ||
      report.final_loss > 10.0 * report.initial_loss) {
    report.diverged = true;
  }

  std::size_t clipped = 0;
  for (const StepRecord& r : report.records) clipped += r.was_clipped ? 1 : 0;
  report.clip_fraction = report.records.empty()
                             ? 0.0
                             : static_cast<double>(clipped) /
                                   static_cast<double>(report.records.size());
  report.spike_count =
      report.loss_curve.size() >= config.spike_window
          ? detect_loss_spikes(report.loss_curve, config.spike_window,
                               config.spike_k)
          : 0;
  return report;
}

std::size_t detect_loss_spikes(std::span<const double> loss_curve,
                               std::size_t window, double k) {
  if (window < 2) throw std::invalid_argument("detector window must be >= 2");
  if (!(k > 0.0)) throw std::invalid_argument("detector k must be > 0");
  if (loss_curve.size() < window) {
    throw std::invalid_argument("loss curve shorter than the detector window");
  }

  std::size_t events = 0;
  bool in_event = false;
  std::vector<double> scratch(window);
  for (std::size_t t = window; t < loss_curve.size(); ++t) {
    scratch.assign(loss_curve.begin() + static_cast<std::ptrdiff_t>(t - window),
                   loss_curve.begin() + static_cast<std::ptrdiff_t>(t));
    const double med = median_of(scratch);
    for (std::size_t i = 0; i < window; ++i) {
      scratch[i] = std::abs(loss_curve[t - window + i] - med);
    }
    const double mad = median_of(scratch);
    const bool flagged = loss_curve[t] > med + k * mad;
    if (flagged && !in_event) ++events;
    in_event = flagged;
  }
  return events;
}

}  // namespace zclip::trainer
