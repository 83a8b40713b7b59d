#pragma once

#include "curvndf/field_net.hpp"
#include "curvndf/geom.hpp"
#include "curvndf/mesher.hpp"
#include "curvndf/scene_oracle.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>

namespace curvndf {

/// Signed distance field in world coordinates.
class DistanceField {
 public:
  virtual ~DistanceField() = default;
  virtual int dim() const = 0;
  /// Values at the columns of `points` (m x B).
  virtual Eigen::VectorXd values(const Eigen::Ref<const Eigen::MatrixXd>& points) const = 0;
  /// Spatial gradients (m x B). The default uses central differences.
  virtual Eigen::MatrixXd gradients(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  double value(const Vec& x) const;
  BatchField batch() const;
};

/// Trained network plus the map from world to canonical coordinates.
class NetField final : public DistanceField {
 public:
  NetField(FieldNet net, SceneTransform transform, int threads = 1);

  int dim() const override { return net_.dim(); }
  Eigen::VectorXd values(const Eigen::Ref<const Eigen::MatrixXd>& points) const override;
  Eigen::MatrixXd gradients(const Eigen::Ref<const Eigen::MatrixXd>& points) const override;

  const FieldNet& net() const { return net_; }
  const SceneTransform& transform() const { return transform_; }

 private:
  Eigen::MatrixXd canonical(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  FieldNet net_;
  SceneTransform transform_;
  int threads_;
};

class OracleField final : public DistanceField {
 public:
  explicit OracleField(AnalyticScene scene) : scene_(std::move(scene)) {}

  int dim() const override { return scene_.dim(); }
  Eigen::VectorXd values(const Eigen::Ref<const Eigen::MatrixXd>& points) const override;
  Eigen::MatrixXd gradients(const Eigen::Ref<const Eigen::MatrixXd>& points) const override;

  const AnalyticScene& scene() const { return scene_; }

 private:
  AnalyticScene scene_;
};

/// Multilinear interpolation of a sample grid; `outside` outside its box.
class GridField final : public DistanceField {
 public:
  GridField(ScalarGrid grid, double outside);

  int dim() const override { return grid_.dim(); }
  Eigen::VectorXd values(const Eigen::Ref<const Eigen::MatrixXd>& points) const override;
  double at(const double* p) const;

  const ScalarGrid& grid() const { return grid_; }

 private:
  ScalarGrid grid_;
  double outside_;
};

/// Caches `field` on a grid with the given samples per axis.
GridField cache_field(const DistanceField& field, const Aabb& box, int samples,
                      double outside, int threads = 1);

struct SdfMetrics {
  std::size_t count = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double eikonal = 0.0;  // mean | |grad| - 1 |
};

struct BandSamplingConfig {
  double band = 0.4;  // keep points with |true distance| < band
  std::size_t samples = 4000;
  std::uint64_t seed = 0;
  bool outside_only = false;
};

/// Uniform rejection samples in `box` whose true distance lies in the band.
Eigen::MatrixXd sample_band(const AnalyticScene& truth, const Aabb& box,
                            const BandSamplingConfig& cfg);

/// Errors of `field` against the oracle at band samples.
SdfMetrics evaluate_band(const DistanceField& field, const AnalyticScene& truth, const Aabb& box,
                         const BandSamplingConfig& cfg);

}  // namespace curvndf
