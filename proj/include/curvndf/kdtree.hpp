#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace curvndf {

/// Static k-d tree over the columns of an m x N matrix, for k-nearest
/// neighbour queries within a training batch.
class KdTree {
 public:
  explicit KdTree(const Eigen::MatrixXd& points);

  /// Indices of the k nearest columns to column `query`, excluding itself.
  /// Equal distances are ordered by index so results are deterministic.
  std::vector<std::int32_t> nearest_excluding(std::int32_t query, int k) const;

 private:
  struct Node {
    std::int32_t begin = 0;
    std::int32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);

  const Eigen::MatrixXd& points_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace curvndf
