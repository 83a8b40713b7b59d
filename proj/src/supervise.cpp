#include "curvndf/supervise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace curvndf {

std::string_view to_string(SupervisionMode mode) {
  switch (mode) {
    case SupervisionMode::RayDistance:
      return "ray";
    case SupervisionMode::ClosestNormal:
      return "dcn";
    case SupervisionMode::CurvatureConstrained:
      return "curvature";
  }
  return "?";
}

SupervisionMode parse_mode(std::string_view text) {
  if (text == "ray" || text == "RayDistance") return SupervisionMode::RayDistance;
  if (text == "dcn" || text == "ClosestNormal") return SupervisionMode::ClosestNormal;
  if (text == "curvature" || text == "CurvatureConstrained") {
    return SupervisionMode::CurvatureConstrained;
  }
  throw std::invalid_argument("unknown supervision mode '" + std::string(text) + "'");
}

Vec normal_dir(const Vec& gradient) {
  const double norm = gradient.norm();
  if (!(norm >= kMinGradientNorm)) throw DegenerateGradient();
  return -gradient / norm;
}

IsoCurvature iso_curvature(const FieldJet& jet, int dim, double min_radius, double max_radius) {
  check_dim(dim);
  const double gnorm = jet.gradient.norm();
  if (!(gnorm >= kMinGradientNorm)) throw DegenerateGradient();
  const double divergence = jet.hessian.trace() / gnorm -
                            jet.gradient.dot(jet.hessian * jet.gradient) / (gnorm * gnorm * gnorm);
  IsoCurvature out;
  out.kappa = std::abs(divergence) / (dim - 1);
  out.radius = out.kappa > 0.0 ? std::clamp(1.0 / out.kappa, min_radius, max_radius) : max_radius;
  return out;
}

double mean_curvature_formula(const FieldJet& jet) {
  const double gnorm = jet.gradient.norm();
  const double g2 = gnorm * gnorm;
  return (jet.gradient.dot(jet.hessian * jet.gradient) - g2 * jet.hessian.trace()) /
         (2.0 * g2 * gnorm);
}

double unit_gradient_divergence(const FieldJet& jet) {
  const double gnorm = jet.gradient.norm();
  return jet.hessian.trace() / gnorm -
         jet.gradient.dot(jet.hessian * jet.gradient) / (gnorm * gnorm * gnorm);
}

double dcn_distance(const Vec& n_unit, const Ray& ray, const Vec& x) {
  return n_unit.dot(ray.endpoint - x);
}

double curvature_distance(double radius, const Ray& ray, const Vec& x, const Vec& n_unit) {
  const Vec to_end = ray.endpoint - x;
  const double d2 = to_end.squaredNorm();
  const double p = n_unit.dot(to_end);
  const double radicand = d2 + radius * radius - 2.0 * radius * p;
  return radius - std::sqrt(std::max(0.0, radicand));
}

double sample_weight(double d_pred_abs, double d_max, double gamma) {
  return std::pow(std::max(0.0, d_max - d_pred_abs), gamma);
}

DistanceEstimate estimate_target(SupervisionMode mode, const Ray& ray, const RaySample& sample,
                                 const FieldJet& jet, int dim, const TargetConfig& cfg) {
  DistanceEstimate est;
  const Vec to_end = ray.endpoint - sample.x;
  const double d = to_end.norm();
  double target = d;
  est.mode_used = SupervisionMode::RayDistance;
  est.roc_query = cfg.max_radius;
  est.normal_unit = d > 0.0 ? Vec(to_end / d) : Vec(Vec::Zero(dim));

  if (mode != SupervisionMode::RayDistance && jet.gradient.norm() >= kMinGradientNorm) {
    est.normal_unit = normal_dir(jet.gradient);
    if (mode == SupervisionMode::ClosestNormal) {
      target = dcn_distance(est.normal_unit, ray, sample.x);
      est.mode_used = SupervisionMode::ClosestNormal;
    } else {
      const IsoCurvature k = iso_curvature(jet, dim, cfg.min_radius, cfg.max_radius);
      est.roc_query = k.radius;
      target = curvature_distance(k.radius, ray, sample.x, est.normal_unit);
      est.mode_used = SupervisionMode::CurvatureConstrained;
    }
  }
  est.roc_surface = est.roc_query - target;
  est.d_hat = std::clamp(target, 0.0, cfg.truncation);
  return est;
}

void assign_weights(std::span<DistanceEstimate> estimates, std::span<const double> predicted,
                    double gamma) {
  if (estimates.size() != predicted.size()) {
    throw std::invalid_argument("estimate and prediction counts differ");
  }
  double d_max = 0.0;
  for (double v : predicted) d_max = std::max(d_max, std::abs(v));
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    estimates[i].weight = sample_weight(std::abs(predicted[i]), d_max, gamma);
  }
}

}  // namespace curvndf
