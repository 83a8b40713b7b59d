#include "curvndf/scene_oracle.hpp"
#include "curvndf/train.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace curvndf;

namespace {

NetConfig tiny_net() {
  NetConfig c;
  c.dim = 2;
  c.encoding = EncodingConfig::geometric(3, 2 * std::numbers::pi);
  c.hidden_width = 12;
  c.hidden_layers = 2;
  c.omega_first = 1.0;
  c.omega_hidden = 1.0;
  return c;
}

// Rays from a ring of sensors to a unit circle, in canonical units.
std::vector<Ray> circle_rays(int count) {
  std::vector<Ray> rays;
  for (int k = 0; k < count; ++k) {
    const double a = 2 * std::numbers::pi * k / count;
    const Vec o = make_point({0.6 * std::cos(a), 0.6 * std::sin(a)});
    const double b = a + 0.3 * std::sin(3.0 * k);
    rays.push_back(make_ray(o, make_point({0.25 * std::cos(b), 0.25 * std::sin(b)})));
  }
  return rays;
}

}  // namespace

TEST_CASE("residual is absolute") {
  CHECK(residual(0.3, 0.5) == doctest::Approx(0.2));
  CHECK(residual(-0.1, 0.0) == doctest::Approx(0.1));
}

TEST_CASE("batch assembly") {
  const auto rays = circle_rays(8);
  const std::vector<std::size_t> idx{3, 1};
  const TrainingBatch b = make_batch(rays, idx, 10, false);
  CHECK(b.rays.size() == 2);
  CHECK(b.samples.size() == 20);
  CHECK(b.samples[10].ray_index == 1);
  CHECK(b.endpoint_points().cols() == 2);
  CHECK(make_batch(rays, idx, 10, true).samples.size() == 18);
}

TEST_CASE("single-term collapse of the loss") {
  const FieldNet net = FieldNet::init(tiny_net(), 1);
  const auto rays = circle_rays(1);
  const std::vector<std::size_t> idx{0};
  TrainingBatch b = make_batch(rays, idx, 2, true);
  REQUIRE(b.samples.size() == 1);
  std::vector<DistanceEstimate> t(1);
  t[0].d_hat = 0.05;
  t[0].weight = 1.0;
  t[0].normal_unit = make_point({1, 0});
  LossWeights w{0.0, 0.0, 0.0};
  const LossResult r = batch_loss(net, b, t, w, LossOptions{});
  const double d = net.eval(b.samples[0].x);
  CHECK(r.breakdown.total == doctest::Approx(std::abs(d - 0.05)).epsilon(1e-12));
}

TEST_CASE("loss gradient matches finite differences with frozen targets") {
  FieldNet net = FieldNet::init(tiny_net(), 2);
  const auto rays = circle_rays(6);
  std::vector<std::size_t> idx(rays.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const TrainingBatch b = make_batch(rays, idx, 8, false);
  const BatchJets jets = evaluate_batch(net, b, 2);
  const auto targets = compute_targets(net, b, SupervisionMode::CurvatureConstrained, TargetConfig{}, jets);
  const LossWeights w{0.1, 0.05, 0.02};
  const LossResult r = batch_loss(net, b, targets, w, LossOptions{});

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
  const double h = 1e-7;
  int checked = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = pick(rng);
    const double saved = net.parameters()[i];
    net.parameters()[i] = saved + h;
    const double fp = batch_loss(net, b, targets, w, LossOptions{}).breakdown.total;
    net.parameters()[i] = saved - h;
    const double fm = batch_loss(net, b, targets, w, LossOptions{}).breakdown.total;
    net.parameters()[i] = saved;
    const double fd = (fp - fm) / (2 * h);
    CHECK(r.gradient[i] == doctest::Approx(fd).epsilon(1e-3).scale(1e-4));
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("AdamW converges on a scalar quadratic") {
  OptimConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 0.0;
  AdamW opt(1, cfg);
  std::vector<double> theta{0.0};
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2.0 * (theta[0] - 3.0)};
    opt.step(theta, g);
  }
  CHECK(theta[0] == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(opt.step_count() == 2000);
}

TEST_CASE("weight decay is decoupled from the gradient") {
  OptimConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.weight_decay = 0.5;
  AdamW opt(2, cfg);
  std::vector<double> theta{2.0, -4.0};
  const std::vector<double> zero{0.0, 0.0};
  opt.step(theta, zero);
  CHECK(theta[0] == doctest::Approx(2.0 * (1 - 1e-2 * 0.5)).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(-4.0 * (1 - 1e-2 * 0.5)).epsilon(1e-15));
}

TEST_CASE("training bookkeeping and determinism") {
  const FieldNet net = FieldNet::init(tiny_net(), 4);
  const auto rays = circle_rays(64);
  TrainConfig cfg;
  cfg.samples_per_ray = 8;
  cfg.optim.rays_per_batch = 16;
  cfg.optim.epochs = 0;
  const TrainResult none = train(net, rays, cfg);
  CHECK(std::equal(none.net.parameters().begin(), none.net.parameters().end(), net.parameters().begin()));
  CHECK(none.history.empty());

  cfg.optim.epochs = 3;
  cfg.optim.learning_rate = 1e-3;
  int calls = 0;
  const TrainResult a = train(net, rays, cfg, [&](const EpochRecord&) { ++calls; });
  const TrainResult b = train(net, rays, cfg);
  CHECK(a.history.size() == 3);
  CHECK(calls == 3);
  CHECK(a.history[0].batches == 4);
  CHECK(std::equal(a.net.parameters().begin(), a.net.parameters().end(), b.net.parameters().begin()));
  CHECK(a.history.back().mean.data < a.history.front().mean.data);
}

TEST_CASE("empty input is rejected") {
  const FieldNet net = FieldNet::init(tiny_net(), 4);
  const TrainingBatch empty;
  CHECK_THROWS_AS(batch_loss(net, empty, {}, LossWeights{}, LossOptions{}), TrainingError);
}
