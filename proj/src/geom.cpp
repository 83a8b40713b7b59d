#include "curvndf/geom.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace curvndf {

void check_dim(int dim) {
  if (dim != 2 && dim != 3) {
    throw GeometryError("dimension must be 2 or 3, got " + std::to_string(dim));
  }
}

bool all_finite(const Vec& v) { return v.array().isFinite().all(); }

Vec make_point(std::initializer_list<double> coords) {
  Vec v(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) v(i++) = c;
  check_dim(static_cast<int>(v.size()));
  return v;
}

Pose::Pose(Mat rotation, Vec translation)
    : rotation_(std::move(rotation)), translation_(std::move(translation)) {
  const int m = static_cast<int>(translation_.size());
  check_dim(m);
  if (rotation_.rows() != m || rotation_.cols() != m) {
    throw GeometryError("pose rotation shape does not match translation");
  }
  if (!rotation_.array().isFinite().all() || !all_finite(translation_)) {
    throw GeometryError("pose has non-finite entries");
  }
  const double ortho = (rotation_.transpose() * rotation_ - Mat::Identity(m, m))
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > 1e-9) {
    throw GeometryError("pose rotation is not orthonormal (error " +
                        std::to_string(ortho) + ")");
  }
  if (std::abs(rotation_.determinant() - 1.0) > 1e-9) {
    throw GeometryError("pose rotation has determinant != +1");
  }
}

Pose Pose::identity(int dim) {
  check_dim(dim);
  return Pose(Mat::Identity(dim, dim), Vec::Zero(dim));
}

Pose Pose::planar(double x, double y, double theta) {
  Mat r(2, 2);
  const double c = std::cos(theta), s = std::sin(theta);
  r << c, -s, s, c;
  return Pose(r, make_point({x, y}));
}

Pose Pose::yaw3(const Vec& translation, double yaw) {
  Mat r = Mat::Identity(3, 3);
  const double c = std::cos(yaw), s = std::sin(yaw);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return Pose(r, translation);
}

Pose Pose::inverse() const {
  Mat rt = rotation_.transpose();
  return Pose(rt, -(rt * translation_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(project_to_rotation(rotation_ * other.rotation_),
              rotation_ * other.translation_ + translation_);
}

double Pose::yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

Mat project_to_rotation(const Mat& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m),
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd u = svd.matrixU();
  const Eigen::MatrixXd& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(u.cols() - 1) *= -1.0;
  return Mat(u * v.transpose());
}

Ray make_ray(Vec origin, Vec endpoint) {
  if (origin.size() != endpoint.size()) {
    throw GeometryError("ray origin and endpoint differ in dimension");
  }
  if (!all_finite(origin) || !all_finite(endpoint)) {
    throw GeometryError("ray has non-finite coordinates");
  }
  if (!((endpoint - origin).norm() > 0.0)) {
    throw GeometryError("ray has zero length");
  }
  return Ray{std::move(origin), std::move(endpoint)};
}

Aabb Aabb::cube(const Vec& center, double half_size) {
  Aabb box{center.array() - half_size, center.array() + half_size};
  box.validate();
  return box;
}

bool Aabb::contains(const Vec& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

void Aabb::validate() const {
  if (min.size() != max.size()) throw GeometryError("aabb corners differ in dimension");
  check_dim(static_cast<int>(min.size()));
  if (!all_finite(min) || !all_finite(max) || !(min.array() < max.array()).all()) {
    throw GeometryError("aabb requires finite min < max componentwise");
  }
}

std::vector<Ray> to_world(const Scan& scan) {
  if (scan.points.empty()) throw GeometryError("scan is empty");
  std::vector<Ray> rays;
  rays.reserve(scan.points.size());
  const Vec& origin = scan.pose.translation();
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Vec& p = scan.points[i];
    if (p.size() != scan.pose.dim()) {
      throw GeometryError("scan point " + std::to_string(i) + " has wrong dimension");
    }
    if (!all_finite(p)) {
      throw GeometryError("scan point " + std::to_string(i) + " is not finite");
    }
    if (p.norm() == 0.0) {
      throw GeometryError("scan point " + std::to_string(i) + " coincides with the sensor");
    }
    rays.push_back(Ray{origin, scan.pose.apply(p)});
  }
  return rays;
}

SceneTransform transform_for(const Aabb& box) {
  box.validate();
  const double half = 0.5 * box.extent().maxCoeff();
  return SceneTransform{box.center(), 1.0 / half};
}

NormalizedRays normalize_scene(std::span<const Ray> rays, const Aabb& box) {
  NormalizedRays out;
  out.transform = transform_for(box);
  out.rays.reserve(rays.size());
  for (const Ray& r : rays) {
    if (r.endpoint.size() != box.dim()) throw GeometryError("ray dimension does not match box");
    if (!box.contains(r.endpoint) || !box.contains(r.origin)) {
      ++out.dropped;
      continue;
    }
    out.rays.push_back(Ray{out.transform.to_canonical(r.origin),
                           out.transform.to_canonical(r.endpoint)});
  }
  if (out.rays.empty()) {
    throw GeometryError("no rays remain inside the bounding box (" +
                        std::to_string(out.dropped) + " dropped)");
  }
  return out;
}

Aabb box_around_origins(std::span<const Scan> scans, double size) {
  if (scans.empty()) throw GeometryError("no scans to anchor the bounding box");
  Vec c = Vec::Zero(scans.front().pose.dim());
  for (const Scan& s : scans) c += s.pose.translation();
  c /= static_cast<double>(scans.size());
  return Aabb::cube(c, 0.5 * size);
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

}  // namespace curvndf
