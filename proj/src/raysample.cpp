#include "curvndf/raysample.hpp"

#include <cmath>
#include <stdexcept>

namespace curvndf {

std::vector<double> log_linear_parameters(int n_samples) {
  if (n_samples < 2) throw std::invalid_argument("need at least 2 samples per ray");
  std::vector<double> t(static_cast<std::size_t>(n_samples));
  const double denom = n_samples - 1;
  for (int l = 1; l <= n_samples; ++l) {
    // l = n - 1 gives exponent 0 exactly, hence t = 0.
    const double exponent = (l == n_samples - 1) ? 0.0 : l / denom - 1.0;
    t[static_cast<std::size_t>(l - 1)] = (1.0 - std::pow(10.0, exponent)) / 0.9;
  }
  return t;
}

std::vector<RaySample> sample_ray(const Ray& ray, int n_samples, std::size_t ray_index,
                                  bool drop_behind_origin) {
  const std::vector<double> ts = log_linear_parameters(n_samples);
  std::vector<RaySample> samples;
  samples.reserve(ts.size());
  for (double t : ts) {
    if (drop_behind_origin && t < 0.0) continue;
    RaySample s;
    s.x = (1.0 - t) * ray.origin + t * ray.endpoint;
    s.t = t;
    s.ray_distance = (ray.endpoint - s.x).norm();
    s.ray_index = ray_index;
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace curvndf
