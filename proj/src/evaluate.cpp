#include "curvndf/evaluate.hpp"

#include "curvndf/parallel.hpp"
#include "curvndf/random.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace curvndf {

Eigen::MatrixXd DistanceField::gradients(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  constexpr double h = 1e-5;
  const Eigen::Index m = points.rows();
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd probes(m, 2 * m * n);
  for (Eigen::Index a = 0; a < m; ++a) {
    Eigen::MatrixXd plus = points;
    Eigen::MatrixXd minus = points;
    plus.row(a).array() += h;
    minus.row(a).array() -= h;
    probes.middleCols(2 * a * n, n) = plus;
    probes.middleCols((2 * a + 1) * n, n) = minus;
  }
  const Eigen::VectorXd v = values(probes);
  Eigen::MatrixXd g(m, n);
  for (Eigen::Index a = 0; a < m; ++a) {
    g.row(a) = ((v.segment(2 * a * n, n) - v.segment((2 * a + 1) * n, n)) / (2.0 * h)).transpose();
  }
  return g;
}

double DistanceField::value(const Vec& x) const {
  Eigen::MatrixXd p = x;
  return values(p)(0);
}

BatchField DistanceField::batch() const {
  return [this](const Eigen::Ref<const Eigen::MatrixXd>& p) { return values(p); };
}

// ---------------------------------------------------------------------------

NetField::NetField(FieldNet net, SceneTransform transform, int threads)
    : net_(std::move(net)), transform_(std::move(transform)), threads_(threads) {
  if (transform_.center.size() != net_.dim()) {
    throw std::invalid_argument("scene transform and network dimensions differ");
  }
}

Eigen::MatrixXd NetField::canonical(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (points.rows() != net_.dim()) throw std::invalid_argument("query dimension mismatch");
  return (points.colwise() - Eigen::VectorXd(transform_.center)) * transform_.scale;
}

Eigen::VectorXd NetField::values(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  const Eigen::MatrixXd c = canonical(points);
  Eigen::VectorXd out(c.cols());
  constexpr Eigen::Index kChunk = 2048;
  const auto chunks = static_cast<std::size_t>((c.cols() + kChunk - 1) / kChunk);
  parallel_for(chunks, threads_, [&](std::size_t k) {
    const Eigen::Index begin = static_cast<Eigen::Index>(k) * kChunk;
    const Eigen::Index n = std::min(kChunk, c.cols() - begin);
    out.segment(begin, n) = net_.eval_batch(c.middleCols(begin, n));
  });
  return out / transform_.scale;
}

Eigen::MatrixXd NetField::gradients(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  // The canonical map scales lengths and values alike, so gradients carry over.
  const Eigen::MatrixXd c = canonical(points);
  Eigen::MatrixXd out(c.rows(), c.cols());
  constexpr Eigen::Index kChunk = 1024;
  const auto chunks = static_cast<std::size_t>((c.cols() + kChunk - 1) / kChunk);
  parallel_for(chunks, threads_, [&](std::size_t k) {
    const Eigen::Index begin = static_cast<Eigen::Index>(k) * kChunk;
    const Eigen::Index n = std::min(kChunk, c.cols() - begin);
    out.middleCols(begin, n) = net_.jet_batch(c.middleCols(begin, n), 1).gradient;
  });
  return out;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd OracleField::values(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::VectorXd out(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) out(i) = scene_.sdf(points.col(i));
  return out;
}

Eigen::MatrixXd OracleField::gradients(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::MatrixXd out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) out.col(i) = scene_.evaluate(points.col(i)).jet.gradient;
  return out;
}

// ---------------------------------------------------------------------------

GridField::GridField(ScalarGrid grid, double outside) : grid_(std::move(grid)), outside_(outside) {
  grid_.validate();
}

double GridField::at(const double* p) const {
  const int m = grid_.dim();
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < m; ++a) {
    const int r = grid_.res[static_cast<std::size_t>(a)];
    const double u = (p[a] - grid_.box.min(a)) / grid_.spacing(a);
    if (!(u >= 0.0 && u <= r - 1)) return outside_;
    const int i = std::min(static_cast<int>(u), r - 2);
    base[static_cast<std::size_t>(a)] = i;
    frac[static_cast<std::size_t>(a)] = u - i;
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << m); ++corner) {
    double w = 1.0;
    std::array<int, 3> ijk = base;
    for (int a = 0; a < m; ++a) {
      const bool hi = (corner >> a) & 1;
      const auto sa = static_cast<std::size_t>(a);
      w *= hi ? frac[sa] : 1.0 - frac[sa];
      ijk[sa] += hi;
    }
    if (w != 0.0) acc += w * grid_.values[grid_.index(ijk)];
  }
  return acc;
}

Eigen::VectorXd GridField::values(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (points.rows() != dim()) throw std::invalid_argument("query dimension mismatch");
  Eigen::VectorXd out(points.cols());
  double p[3];
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    for (int a = 0; a < dim(); ++a) p[a] = points(a, i);
    out(i) = at(p);
  }
  return out;
}

GridField cache_field(const DistanceField& field, const Aabb& box, int samples, double outside,
                      int threads) {
  const std::vector<int> res(static_cast<std::size_t>(field.dim()), samples);
  return GridField(sample_grid(field.batch(), box, res, threads), outside);
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd sample_band(const AnalyticScene& truth, const Aabb& box,
                            const BandSamplingConfig& cfg) {
  box.validate();
  if (box.dim() != truth.dim()) throw std::invalid_argument("box and scene dimensions differ");
  if (!(cfg.band > 0.0)) throw std::invalid_argument("band must be positive");
  const int m = truth.dim();
  std::mt19937_64 rng(cfg.seed);
  Eigen::MatrixXd pts(m, static_cast<Eigen::Index>(cfg.samples));
  std::size_t kept = 0;
  const std::size_t max_tries = cfg.samples * 100000 + 1000;
  for (std::size_t tries = 0; kept < cfg.samples; ++tries) {
    if (tries >= max_tries) throw std::runtime_error("band sampling found too few points near the surface");
    Vec x(m);
    for (int a = 0; a < m; ++a) x(a) = uniform(rng, box.min(a), box.max(a));
    const double d = truth.sdf(x);
    if (std::abs(d) >= cfg.band || (cfg.outside_only && d < 0.0)) continue;
    pts.col(static_cast<Eigen::Index>(kept++)) = x;
  }
  return pts;
}

SdfMetrics evaluate_band(const DistanceField& field, const AnalyticScene& truth, const Aabb& box,
                         const BandSamplingConfig& cfg) {
  const Eigen::MatrixXd pts = sample_band(truth, box, cfg);
  const Eigen::VectorXd pred = field.values(pts);
  const Eigen::MatrixXd grad = field.gradients(pts);
  SdfMetrics out;
  out.count = static_cast<std::size_t>(pts.cols());
  if (out.count == 0) return out;
  double abs_sum = 0.0, sq_sum = 0.0, eik_sum = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double err = pred(i) - truth.sdf(pts.col(i));
    abs_sum += std::abs(err);
    sq_sum += err * err;
    eik_sum += std::abs(grad.col(i).norm() - 1.0);
  }
  const auto n = static_cast<double>(out.count);
  out.mae = abs_sum / n;
  out.rmse = std::sqrt(sq_sum / n);
  out.eikonal = eik_sum / n;
  return out;
}

}  // namespace curvndf
