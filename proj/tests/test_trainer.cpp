#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "zclip/rng.hpp"
#include "zclip/trainer.hpp"

using namespace zclip;
using namespace zclip::trainer;

namespace {

TrainConfig stable_config(std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.steps = 300;
  cfg.batch_size = 64;
  cfg.policy = NoClip{};
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ToyModel model({64, 64}, seed);
    const Dataset ds = make_dataset(256, 32, seed + 100);

    std::vector<double> grad;
    model.loss_and_gradient(ds.train, grad);
    REQUIRE(grad.size() == model.parameter_count());

    Rng picker(seed + 900);
    const double h = 1e-5;
    for (std::size_t layer = 0; layer < model.layer_count(); ++layer) {
      const auto [first, last] = model.layer_range(layer);
      for (int sample = 0; sample < 10; ++sample) {
        const std::size_t i = first + picker.below(last - first);
        const double saved = model.parameter(i);
        model.set_parameter(i, saved + h);
        const double hi = model.loss(ds.train);
        model.set_parameter(i, saved - h);
        const double lo = model.loss(ds.train);
        model.set_parameter(i, saved);
        const double fd = (hi - lo) / (2.0 * h);
        CHECK(std::abs(fd - grad[i]) <=
              1e-4 * std::max({std::abs(grad[i]), std::abs(fd), 1e-6}));
      }
    }
  }
}

TEST_CASE("a calm run learns: final loss drops below the untrained loss") {
  const TrainReport report = train(stable_config());
  CHECK_FALSE(report.diverged);
  CHECK(report.final_loss < report.initial_loss);
  CHECK(report.spike_count == 0);
  CHECK(report.clip_fraction == 0.0);
}

TEST_CASE("fixed clipping above every observed norm is a bitwise no-op") {
  const TrainReport baseline = train(stable_config(3));
  double max_norm = 0.0;
  for (double n : baseline.grad_norm_pre) max_norm = std::max(max_norm, n);

  TrainConfig cfg = stable_config(3);
  cfg.policy = FixedClip{max_norm * 2.0};
  const TrainReport clipped = train(cfg);

  CHECK(clipped.loss_curve == baseline.loss_curve);
  CHECK(clipped.grad_norm_pre == baseline.grad_norm_pre);
  CHECK(clipped.grad_norm_post == baseline.grad_norm_post);
  CHECK(clipped.clip_fraction == 0.0);
}

TEST_CASE("identical configurations reproduce identical reports") {
  TrainConfig cfg = stable_config(11);
  cfg.policy = ZClip{};
  cfg.spike_injection = {0.05, 0.5};
  const TrainReport a = train(cfg);
  const TrainReport b = train(cfg);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.grad_norm_pre == b.grad_norm_pre);
  CHECK(a.grad_norm_post == b.grad_norm_post);
  CHECK(a.spike_count == b.spike_count);
  CHECK(a.diverged == b.diverged);
}

TEST_CASE("a pathological learning rate is reported as divergence") {
  TrainConfig cfg = stable_config(1);
  cfg.learning_rate = 1e25;
  cfg.steps = 200;
  const TrainReport report = train(cfg);
  CHECK(report.diverged);
  CHECK(report.loss_curve.size() <= cfg.steps);
}

TEST_CASE("warmup-cosine schedule ramps and decays to the end fraction") {
  TrainConfig cfg = stable_config();
  cfg.learning_rate = 1.0;
  cfg.steps = 1000;
  cfg.schedule = {ScheduleKind::warmup_cosine, 100, 0.10};

  CHECK(learning_rate_at(cfg, 0) == doctest::Approx(0.01));
  CHECK(learning_rate_at(cfg, 99) == doctest::Approx(1.0));
  CHECK(learning_rate_at(cfg, 999) ==
        doctest::Approx(0.10).epsilon(1e-4));  // 10% floor of the peak
  double prev = learning_rate_at(cfg, 100);
  for (std::size_t t = 101; t < 1000; ++t) {
    const double lr = learning_rate_at(cfg, t);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
}

TEST_CASE("loss spike detector on a monotone decreasing curve") {
  std::vector<double> curve;
  for (int i = 0; i < 500; ++i) curve.push_back(2.0 * std::exp(-i / 100.0));
  CHECK(detect_loss_spikes(curve, 100, 10.0) == 0);
}

TEST_CASE("loss spike detector merges one excursion into one event") {
  std::vector<double> curve(400, 1.0);
  curve[250] = curve[251] = curve[252] = 100.0;
  CHECK(detect_loss_spikes(curve, 100, 10.0) == 1);
}

TEST_CASE("loss spike detector finds exactly the injected excursions") {
  Rng rng(77);
  std::vector<double> curve;
  for (int i = 0; i < 1200; ++i) curve.push_back(5.0 + 0.1 * rng.normal());
  // Gaussian MAD is ~0.0674; 20x MAD excursions are unambiguous
  const std::size_t sites[] = {200, 400, 600, 800, 1000};
  for (std::size_t s : sites) curve[s] = 5.0 + 20.0 * 0.0674 * 1.5;
  CHECK(detect_loss_spikes(curve, 100, 10.0) == 5);
}

TEST_CASE("loss spike detector validates its inputs") {
  const std::vector<double> tiny(10, 1.0);
  CHECK_THROWS_AS(detect_loss_spikes(tiny, 100, 10.0), std::invalid_argument);
  const std::vector<double> curve(200, 1.0);
  CHECK_THROWS_AS(detect_loss_spikes(curve, 1, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(detect_loss_spikes(curve, 100, 0.0), std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig cfg = stable_config();
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(cfg), std::invalid_argument);
  cfg = stable_config();
  cfg.schedule = {ScheduleKind::warmup_cosine, 0, 0.1};
  CHECK_THROWS_AS(train(cfg), std::invalid_argument);
  cfg = stable_config();
  cfg.spike_injection.rate = 1.5;
  CHECK_THROWS_AS(train(cfg), std::invalid_argument);
}
