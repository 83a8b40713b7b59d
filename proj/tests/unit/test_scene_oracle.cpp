#include "curvndf/scene_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace curvndf;

TEST_CASE("sphere jet in closed form") {
  AnalyticScene s(3);
  s.add_ball(make_point({0, 0, 0}), 1.0);
  const FieldJet j = s.jet(make_point({2, 0, 0}));
  CHECK(j.value == 1.0);
  CHECK((j.gradient - make_point({1, 0, 0})).norm() < 1e-15);
  Mat h = Mat::Zero(3, 3);
  h(1, 1) = h(2, 2) = 0.5;
  CHECK((j.hessian - h).norm() < 1e-15);
  CHECK(oracle_sdf(s, make_point({0, 0, 0.5})) == doctest::Approx(-0.5));
}

TEST_CASE("union takes the closer primitive") {
  AnalyticScene s(3);
  s.add_ball(make_point({0, 0, 0}), 1.0).add_ball(make_point({5, 0, 0}), 1.0);
  const OracleSample e = s.evaluate(make_point({1.5, 0, 0}));
  CHECK(e.active == 0);
  CHECK(e.jet.value == doctest::Approx(0.5));
  CHECK(!s.evaluate(make_point({2.5, 0, 0})).smooth);  // equidistant tie
}

TEST_CASE("box corner distance") {
  AnalyticScene s(3);
  s.add_box(make_point({0, 0, 0}), make_point({1, 1, 1}));
  CHECK(s.sdf(make_point({2, 2, 2})) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(s.sdf(make_point({0.5, 0, 0})) == doctest::Approx(-0.5));
  CHECK(!s.evaluate(make_point({1, 1, 0})).smooth);  // on an edge
}

TEST_CASE("polygon and plane in 2D") {
  AnalyticScene s(2);
  s.add_polygon({make_point({0, 0}), make_point({2, 0}), make_point({2, 2}), make_point({0, 2})});
  CHECK(s.sdf(make_point({1, -1})) == doctest::Approx(1.0));
  CHECK(s.sdf(make_point({1, 1})) == doctest::Approx(-1.0));
  CHECK(s.sdf(make_point({3, 3})) == doctest::Approx(std::sqrt(2.0)));
  AnalyticScene p(2);
  p.add_plane(make_point({0, 1}), 1.0);
  CHECK(p.sdf(make_point({4, 3})) == doctest::Approx(2.0));
}

TEST_CASE("jets are eikonal and match finite differences at smooth points") {
  AnalyticScene s(3);
  s.add_ball(make_point({0.5, 0, 0}), 0.7).add_box(make_point({-1, 1, 0}), make_point({0.3, 0.4, 0.5}));
  s.add_plane(make_point({0, 0, 1}), -2.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  int smooth = 0;
  for (int k = 0; k < 300; ++k) {
    const Vec x = make_point({u(rng), u(rng), u(rng)});
    const OracleSample e = s.evaluate(x);
    if (!e.smooth) continue;
    ++smooth;
    CHECK(std::abs(e.jet.gradient.norm() - 1.0) < 1e-9);
    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
      Vec xp = x, xm = x;
      xp(a) += h;
      xm(a) -= h;
      CHECK(e.jet.gradient(a) == doctest::Approx((s.sdf(xp) - s.sdf(xm)) / (2 * h)).epsilon(1e-6).scale(1e-3));
    }
  }
  CHECK(smooth > 200);
}

TEST_CASE("scene text round trip") {
  std::istringstream in("# desk\nsphere 0 0 0 1\nbox 1 2 3 0.5 0.5 0.5\nplane 0 0 1 -1\n");
  const AnalyticScene s = AnalyticScene::parse(in);
  CHECK(s.dim() == 3);
  CHECK(s.size() == 3);
  std::ostringstream out;
  s.write(out);
  std::istringstream again(out.str());
  const AnalyticScene t = AnalyticScene::parse(again);
  const Vec x = make_point({0.3, 1.7, 2.2});
  CHECK(t.sdf(x) == s.sdf(x));

  std::istringstream bad("sphere 0 0 1\n");
  CHECK_THROWS_AS(AnalyticScene::parse(bad), SceneError);
  std::istringstream mixed("circle 0 0 1\nsphere 0 0 0 1\n");
  CHECK_THROWS_AS(AnalyticScene::parse(mixed), SceneError);
}

TEST_CASE("simulated scan hits the sphere head on") {
  AnalyticScene s(3);
  s.add_ball(make_point({0, 0, 0}), 1.0);
  ScannerConfig cfg;
  cfg.beams = 1;
  const Scan scan = simulate_scan(s, Pose::yaw3(make_point({-3, 0, 0}), 0.0), cfg);
  REQUIRE(scan.points.size() == 1);
  CHECK(scan.points[0].norm() == doctest::Approx(2.0).epsilon(1e-6));
  for (const Ray& r : to_world(scan)) CHECK(std::abs(s.sdf(r.endpoint)) < 1e-6);
}

TEST_CASE("misses are dropped and noise is seeded") {
  AnalyticScene s(2);
  s.add_ball(make_point({3, 0}), 1.0);
  ScannerConfig cfg;
  cfg.beams = 36;
  cfg.fov = 2 * std::numbers::pi;
  cfg.noise_sigma = 0.01;
  const Pose pose = Pose::planar(0, 0, 0);
  const Scan a = simulate_scan(s, pose, cfg, 5), b = simulate_scan(s, pose, cfg, 5);
  CHECK(a.points.size() < 36);
  CHECK(!a.points.empty());
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i] == b.points[i]);
  CHECK_THROWS_AS(simulate_scan(s, Pose::planar(0, 0, std::numbers::pi), ScannerConfig{1, 0.1, 10, 0, 0}),
                  SceneError);
  CHECK_THROWS_AS(simulate_scan(s, Pose::planar(3, 0, 0), cfg), SceneError);
}

TEST_CASE("beam patterns") {
  ScannerConfig cfg;
  cfg.beams = 64;
  for (int dim : {2, 3}) {
    const auto dirs = beam_directions(dim, cfg);
    CHECK(dirs.size() == 64);
    for (const Vec& d : dirs) {
      CHECK(d.norm() == doctest::Approx(1.0));
      CHECK(std::acos(std::clamp(d(0), -1.0, 1.0)) <= cfg.fov / 2 + 1e-12);
    }
  }
}
