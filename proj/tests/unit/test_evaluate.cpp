#include "curvndf/evaluate.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace curvndf;

namespace {

AnalyticScene unit_sphere() {
  AnalyticScene s(3);
  s.add_ball(make_point({0, 0, 0}), 1.0);
  return s;
}

}  // namespace

TEST_CASE("oracle field has zero band error") {
  const AnalyticScene s = unit_sphere();
  const OracleField f(s);
  BandSamplingConfig bc;
  bc.samples = 500;
  const SdfMetrics m = evaluate_band(f, s, Aabb::cube(make_point({0, 0, 0}), 2.0), bc);
  CHECK(m.count == 500);
  CHECK(m.mae < 1e-12);
  CHECK(m.eikonal < 1e-9);
}

TEST_CASE("band samples respect the band and the seed") {
  const AnalyticScene s = unit_sphere();
  BandSamplingConfig bc;
  bc.samples = 200;
  bc.band = 0.1;
  const Aabb box = Aabb::cube(make_point({0, 0, 0}), 2.0);
  const Eigen::MatrixXd a = sample_band(s, box, bc), b = sample_band(s, box, bc);
  CHECK(a == b);
  for (Eigen::Index i = 0; i < a.cols(); ++i) CHECK(std::abs(s.sdf(Vec(a.col(i)))) < 0.1);
  bc.outside_only = true;
  const Eigen::MatrixXd o = sample_band(s, box, bc);
  for (Eigen::Index i = 0; i < o.cols(); ++i) CHECK(s.sdf(Vec(o.col(i))) >= 0.0);
}

TEST_CASE("a constant offset shows up as MAE and RMSE") {
  const AnalyticScene s = unit_sphere();
  AnalyticScene bigger(3);
  bigger.add_ball(make_point({0, 0, 0}), 0.9);  // distance + 0.1 everywhere
  const OracleField f(bigger);
  BandSamplingConfig bc;
  bc.samples = 300;
  bc.band = 0.3;
  const SdfMetrics m = evaluate_band(f, s, Aabb::cube(make_point({0, 0, 0}), 2.0), bc);
  CHECK(m.mae == doctest::Approx(0.1));
  CHECK(m.rmse == doctest::Approx(0.1));
}

TEST_CASE("network field maps world to canonical coordinates") {
  NetConfig nc;
  nc.dim = 2;
  nc.encoding = EncodingConfig::geometric(3, 2 * std::numbers::pi);
  nc.hidden_width = 8;
  nc.hidden_layers = 1;
  const FieldNet net = FieldNet::init(nc, 1);
  const SceneTransform tf{make_point({10, -5}), 0.25};
  const NetField f(net, tf);
  const Vec x = make_point({11, -4});
  CHECK(f.value(x) == doctest::Approx(net.eval(tf.to_canonical(x)) / 0.25));
  Eigen::MatrixXd p(2, 1);
  p.col(0) = x;
  const Eigen::MatrixXd g = f.gradients(p);
  const FieldJet j = net.eval_jet(tf.to_canonical(x));
  CHECK((Vec(g.col(0)) - j.gradient).norm() < 1e-12);
}

TEST_CASE("cached grid interpolates linear fields exactly") {
  AnalyticScene plane(2);
  plane.add_plane(make_point({0.6, 0.8}), 0.3);
  const OracleField f(plane);
  const GridField g = cache_field(f, Aabb::cube(make_point({0, 0}), 2.0), 21, 5.0);
  CHECK(g.value(make_point({0.137, -0.452})) == doctest::Approx(plane.sdf(make_point({0.137, -0.452}))));
  CHECK(g.value(make_point({3, 0})) == 5.0);
}
