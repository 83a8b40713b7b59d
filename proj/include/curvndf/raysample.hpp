#pragma once

#include "curvndf/geom.hpp"

#include <cstddef>
#include <vector>

namespace curvndf {

/// Query point on a beam. x = (1 - t) o + t e, ray_distance = |e - x|.
struct RaySample {
  Vec x;
  double t = 0.0;
  double ray_distance = 0.0;
  std::size_t ray_index = 0;
};

/// Log-linear interpolation parameters t_l = (1 - 10^(l/(n-1) - 1)) / 0.9,
/// l = 1..n. Decreasing in l; t_{n-1} = 0 and t_n < 0 (behind the sensor).
std::vector<double> log_linear_parameters(int n_samples);

/// Samples ordered by l. With drop_behind_origin the l = n sample (t < 0) is
/// omitted. Throws std::invalid_argument for n_samples < 2.
std::vector<RaySample> sample_ray(const Ray& ray, int n_samples, std::size_t ray_index = 0,
                                  bool drop_behind_origin = false);

}  // namespace curvndf
