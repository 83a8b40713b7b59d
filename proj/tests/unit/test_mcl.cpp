#include "curvndf/mcl.hpp"
#include "curvndf/scene_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace curvndf;

namespace {

AnalyticScene corner_scene() {
  AnalyticScene s(2);
  s.add_box(make_point({0, 4}), make_point({5, 0.2}));
  s.add_box(make_point({-4, 0}), make_point({0.2, 5}));
  s.add_ball(make_point({2.5, -1.5}), 0.8);
  return s;
}

std::vector<Vec> scan_at(const AnalyticScene& s, const Pose2& p) {
  ScannerConfig sc;
  sc.beams = 32;
  sc.fov = 2 * std::numbers::pi;
  sc.max_range = 20;
  return simulate_scan(s, Pose::planar(p.x, p.y, p.theta), sc).points;
}

}  // namespace

TEST_CASE("pose algebra") {
  const Pose2 a{1, 2, 0.5}, b{-0.3, 0.7, 1.2};
  const Pose2 c = a.compose(a.between(b));
  CHECK(c.x == doctest::Approx(b.x));
  CHECK(c.y == doctest::Approx(b.y));
  CHECK(c.theta == doctest::Approx(b.theta));
  const Vec v = Pose2{0, 0, std::numbers::pi / 2}.transform(make_point({1, 0}));
  CHECK(std::abs(v(0)) < 1e-12);
  CHECK(v(1) == doctest::Approx(1.0));
}

TEST_CASE("estimate statistics") {
  PoseEstimate e = estimate({{{0, 0, 0}, 0.5}, {{2, 0, 0}, 0.5}}, 0.3);
  CHECK(e.pose.x == doctest::Approx(1.0));
  CHECK(e.std == doctest::Approx(1.0));
  CHECK(!e.converged);

  const double deg = std::numbers::pi / 180;
  e = estimate({{{0, 0, 179 * deg}, 1}, {{0, 0, -179 * deg}, 1}}, 0.3);
  CHECK(std::abs(std::abs(e.pose.theta) - std::numbers::pi) < 1e-9);

  e = estimate({{{3, 4, 1}, 1}, {{3, 4, 1}, 1}}, 0.3);
  CHECK(e.std == 0.0);
  CHECK(e.converged);
}

TEST_CASE("uniform initialisation") {
  MclConfig cfg;
  cfg.particles = 100000;
  ParticleFilter f(cfg, 3);
  f.init_uniform(Aabb{make_point({-1, 2}), make_point({3, 6})});
  double mx = 0, my = 0;
  for (const Particle& p : f.particles()) {
    mx += p.pose.x;
    my += p.pose.y;
    CHECK(p.pose.theta >= -std::numbers::pi);
    CHECK(p.pose.theta < std::numbers::pi);
  }
  mx /= cfg.particles;
  my /= cfg.particles;
  CHECK(std::abs(mx - 1.0) < 0.04);
  CHECK(std::abs(my - 4.0) < 0.04);

  cfg.particles = 1;
  ParticleFilter one(cfg, 3);
  one.init_uniform(Aabb{make_point({-1, 2}), make_point({3, 6})});
  REQUIRE(one.particles().size() == 1);
  CHECK(one.particles()[0].weight == 1.0);

  cfg.particles = 50;
  ParticleFilter a(cfg, 9), b(cfg, 9);
  a.init_uniform(Aabb{make_point({0, 0}), make_point({1, 1})});
  b.init_uniform(Aabb{make_point({0, 0}), make_point({1, 1})});
  for (int i = 0; i < 50; ++i) CHECK(a.particles()[i].pose.x == b.particles()[i].pose.x);
}

TEST_CASE("resampling keeps the count and equalises weights") {
  std::vector<Particle> ps{{{0, 0, 0}, 0.7}, {{1, 0, 0}, 0.1}, {{2, 0, 0}, 0.2}};
  std::mt19937_64 rng(1);
  const auto out = low_variance_resample(ps, rng);
  CHECK(out.size() == 3);
  for (const Particle& p : out) CHECK(p.weight == doctest::Approx(1.0 / 3));
}

TEST_CASE("likelihood prefers the true pose") {
  const AnalyticScene s = corner_scene();
  const OracleField field(s);
  const Pose2 truth{0.5, 0.5, 0.3};
  const auto scan = scan_at(s, truth);
  const Eigen::VectorXd ll = log_likelihoods({truth, {truth.x + 0.5, truth.y, truth.theta}}, scan, field, 0.1);
  CHECK(std::abs(ll(0)) < 1e-6);
  CHECK(ll(1) < ll(0));
}

TEST_CASE("motion gates") {
  const AnalyticScene s = corner_scene();
  const OracleField field(s);
  MclConfig cfg;
  cfg.particles = 200;
  ParticleFilter f(cfg, 5);
  f.init_uniform(Aabb{make_point({-3, -3}), make_point({3, 3})});
  const auto scan = scan_at(s, {0, 0, 0});
  CHECK(f.step({0, 0, 0}, scan, field));  // first call always updates
  const auto weights_before = f.particles();
  CHECK(!f.step({0.01, 0, 0}, scan, field));
  for (std::size_t i = 0; i < weights_before.size(); ++i) {
    CHECK(f.particles()[i].weight == weights_before[i].weight);
  }
  CHECK(!f.step({0.02, 0, 0}, scan, field));
  CHECK(f.step({0.02, 0, 0}, scan, field));  // 0.05 accumulated
  CHECK(f.step({0, 0, 0.1}, scan, field));
}

TEST_CASE("single particle at the truth stays there") {
  const AnalyticScene s = corner_scene();
  const OracleField field(s);
  MclConfig cfg;
  cfg.particles = 1;
  cfg.odom_trans_base = cfg.odom_trans_frac = cfg.odom_rot_base = cfg.odom_rot_frac = 0.0;
  ParticleFilter f(cfg, 1);
  f.set_particles({{{0.5, 0.5, 0.3}, 1.0}});
  f.step({0, 0, 0}, scan_at(s, {0.5, 0.5, 0.3}), field);
  const PoseEstimate e = f.estimate();
  CHECK(e.pose.x == doctest::Approx(0.5));
  CHECK(e.pose.theta == doctest::Approx(0.3));
}

TEST_CASE("run metrics") {
  const std::vector<Pose2> gt{{0, 0, 0}, {1, 0, 0}};
  LocalizationRun exact;
  exact.estimates = {{{0, 0, 0}, 0.1, true}, {{1, 0, 0}, 0.1, true}};
  exact.converged_at = 0;
  auto m = run_metrics(gt, {exact});
  REQUIRE(m);
  CHECK(m->rmse == 0.0);
  CHECK(m->mae == 0.0);

  LocalizationRun off = exact;
  off.estimates[0].pose.y = 1.0;
  off.estimates[1].pose.y = -1.0;
  m = run_metrics(gt, {off});
  CHECK(m->rmse == doctest::Approx(1.0));
  CHECK(m->mae == doctest::Approx(1.0));

  LocalizationRun split = exact;
  split.estimates[1].pose.x = 3.0;
  m = run_metrics(gt, {split});
  CHECK(m->mae == doctest::Approx(1.0));
  CHECK(m->rmse == doctest::Approx(std::sqrt(2.0)));

  LocalizationRun lost;
  lost.estimates = exact.estimates;
  m = run_metrics(gt, {lost, split});
  CHECK(m->converged_runs == 1);
  CHECK(m->runs == 2);
  CHECK(!run_metrics(gt, {lost}));
}

TEST_CASE("global localisation converges with the oracle map") {
  const AnalyticScene s = corner_scene();
  const OracleField field(s);
  std::vector<Pose2> traj;
  std::vector<std::vector<Vec>> scans;
  for (int k = 0; k < 40; ++k) {
    const double a = 0.1 * k;
    traj.push_back({1.5 * std::cos(a), 1.5 * std::sin(a), a + std::numbers::pi / 2});
    scans.push_back(scan_at(s, traj.back()));
  }
  MclConfig cfg;
  cfg.particles = 10000;
  const Aabb box{make_point({-6, -6}), make_point({6, 6})};
  std::vector<LocalizationRun> runs;
  for (std::uint64_t r = 0; r < 3; ++r) runs.push_back(run_localization(field, box, scans, traj, cfg, r));
  const auto m = run_metrics(traj, runs);
  REQUIRE(m);
  CHECK(m->converged_runs >= 2);
  CHECK(m->rmse < 0.1);
  CHECK(m->rmse >= m->mae);
}
