#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvndf {

// Spatial dimension is a run-level constant, either 2 or 3. Fixed-capacity
// Eigen types keep small vectors off the heap.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;
using Point = Vec;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check_dim(int dim);
bool all_finite(const Vec& v);

Vec make_point(std::initializer_list<double> coords);

/// Rigid transform x -> R x + t. Construction validates orthonormality
/// (R^T R = I and det R = +1, both within 1e-9).
class Pose {
 public:
  Pose(Mat rotation, Vec translation);

  static Pose identity(int dim);
  /// Planar pose from (x, y, heading).
  static Pose planar(double x, double y, double theta);
  /// Rotation about the z axis followed by translation, 3D.
  static Pose yaw3(const Vec& translation, double yaw);

  int dim() const { return static_cast<int>(translation_.size()); }
  const Mat& rotation() const { return rotation_; }
  const Vec& translation() const { return translation_; }

  Vec apply(const Vec& p) const { return rotation_ * p + translation_; }
  Pose inverse() const;
  Pose operator*(const Pose& other) const;

  /// Heading of the x axis in the xy plane.
  double yaw() const;

 private:
  Mat rotation_;
  Vec translation_;
};

/// Closest rotation (in Frobenius norm) to an approximately orthonormal matrix.
Mat project_to_rotation(const Mat& m);

struct Ray {
  Vec origin;
  Vec endpoint;

  double length() const { return (endpoint - origin).norm(); }
  Vec direction() const { return (endpoint - origin) / length(); }
};

/// Validating constructor: both points finite, same dimension, non-zero length.
Ray make_ray(Vec origin, Vec endpoint);

struct Scan {
  Pose pose;
  std::vector<Vec> points;  // sensor frame
};

struct Aabb {
  Vec min;
  Vec max;

  static Aabb cube(const Vec& center, double half_size);

  int dim() const { return static_cast<int>(min.size()); }
  Vec center() const { return 0.5 * (min + max); }
  Vec extent() const { return max - min; }
  bool contains(const Vec& p) const;
  void validate() const;
};

/// Returns the world-frame rays of a scan. Non-finite points are rejected
/// with their index.
std::vector<Ray> to_world(const Scan& scan);

/// Uniform-scale affine map from world coordinates into the canonical cube
/// [-1, 1]^m: canonical = (world - center) * scale. Distances scale by the
/// same factor, so signed distances stay signed distances.
struct SceneTransform {
  Vec center;
  double scale = 1.0;

  Vec to_canonical(const Vec& world) const { return (world - center) * scale; }
  Vec to_world(const Vec& canonical) const { return canonical / scale + center; }
  double distance_to_world(double d) const { return d / scale; }
  double distance_to_canonical(double d) const { return d * scale; }
};

SceneTransform transform_for(const Aabb& box);

struct NormalizedRays {
  std::vector<Ray> rays;
  SceneTransform transform;
  std::size_t dropped = 0;
};

/// Maps rays into the canonical cube of `box`. Rays whose endpoint (or
/// origin) lies outside the box are dropped and counted; an empty result
/// is an error.
NormalizedRays normalize_scene(std::span<const Ray> rays, const Aabb& box);

/// Bounding cube of the given edge length centred on the centroid of the
/// scan origins.
Aabb box_around_origins(std::span<const Scan> scans, double size);

double wrap_angle(double a);

}  // namespace curvndf
