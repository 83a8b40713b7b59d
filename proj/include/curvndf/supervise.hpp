#pragma once

#include "curvndf/field_net.hpp"
#include "curvndf/geom.hpp"
#include "curvndf/raysample.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace curvndf {

enum class SupervisionMode { RayDistance, ClosestNormal, CurvatureConstrained };

std::string_view to_string(SupervisionMode mode);
/// Accepts "ray", "dcn", "curvature" (and the enum names).
SupervisionMode parse_mode(std::string_view text);

inline constexpr double kMinGradientNorm = 1e-8;

class DegenerateGradient : public std::runtime_error {
 public:
  DegenerateGradient() : std::runtime_error("gradient norm below threshold") {}
};

struct TargetConfig {
  double truncation = 0.2;  // tau, canonical units
  double min_radius = 1e-3;
  double max_radius = 1e6;
  double gamma = 3.0;
};

/// Per-sample supervision target.
struct DistanceEstimate {
  double d_hat = 0.0;
  double weight = 0.0;
  double roc_query = 0.0;    // R, radius of curvature of the isoline through x
  double roc_surface = 0.0;  // r, radius at the corresponding surface point
  Vec normal_unit;
  SupervisionMode mode_used = SupervisionMode::RayDistance;
};

/// -g / |g|. Throws DegenerateGradient when |g| < kMinGradientNorm.
Vec normal_dir(const Vec& gradient);

struct IsoCurvature {
  double kappa = 0.0;
  double radius = 0.0;
};

/// Curvature of the isoline/isosurface through the jet's point, averaged over
/// the m - 1 principal directions:
///   kappa = |tr(H)/|g| - g^T H g / |g|^3| / (m - 1),
/// radius = clamp(1 / kappa, min_radius, max_radius).
IsoCurvature iso_curvature(const FieldJet& jet, int dim, double min_radius = 1e-3,
                           double max_radius = 1e6);

/// The two closed forms from the literature, unscaled, for inspection:
/// (g^T H g - |g|^2 tr H) / (2 |g|^3) and div(g / |g|).
double mean_curvature_formula(const FieldJet& jet);
double unit_gradient_divergence(const FieldJet& jet);

/// n^T (e - x) for a unit normal n.
double dcn_distance(const Vec& n_unit, const Ray& ray, const Vec& x);

/// R - sqrt(max(0, d^2 + R^2 - 2 R n^T (e - x))), d = |e - x|.
double curvature_distance(double radius, const Ray& ray, const Vec& x, const Vec& n_unit);

/// (max(0, d_max - |D|))^gamma.
double sample_weight(double d_pred_abs, double d_max, double gamma);

/// Computes the target of one sample. Falls back to the ray distance when the
/// gradient is degenerate. Truncates d_hat to [0, truncation]. The weight is
/// left at zero; see assign_weights.
DistanceEstimate estimate_target(SupervisionMode mode, const Ray& ray, const RaySample& sample,
                                 const FieldJet& jet, int dim, const TargetConfig& cfg);

/// Fills weights from predicted values, d_max = max |D| over the batch.
void assign_weights(std::span<DistanceEstimate> estimates, std::span<const double> predicted,
                    double gamma);

}  // namespace curvndf
