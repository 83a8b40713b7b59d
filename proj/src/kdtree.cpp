#include "curvndf/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <utility>

namespace curvndf {
namespace {
constexpr std::int32_t kLeafSize = 16;
}

KdTree::KdTree(const Eigen::MatrixXd& points) : points_(points) {
  order_.resize(static_cast<std::size_t>(points.cols()));
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) build(0, static_cast<std::int32_t>(order_.size()));
}

std::int32_t KdTree::build(std::int32_t begin, std::int32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::VectorXd lo = points_.col(order_[begin]);
  Eigen::VectorXd hi = lo;
  for (std::int32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[i]));
    hi = hi.cwiseMax(points_.col(order_[i]));
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) <= lo(axis)) return id;  // all points coincide

  const std::int32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     const double va = points_(axis, a), vb = points_(axis, b);
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_(axis, order_[mid]);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = static_cast<int>(axis);
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::int32_t> KdTree::nearest_excluding(std::int32_t query, int k) const {
  using Entry = std::pair<double, std::int32_t>;
  std::vector<Entry> best;  // sorted ascending, at most k
  if (k <= 0 || nodes_.empty()) return {};
  const Eigen::VectorXd q = points_.col(query);

  auto worst = [&]() {
    return static_cast<int>(best.size()) < k ? std::numeric_limits<double>::infinity()
                                             : best.back().first;
  };
  auto offer = [&](std::int32_t idx) {
    if (idx == query) return;
    const Entry e{(points_.col(idx) - q).squaredNorm(), idx};
    if (static_cast<int>(best.size()) == k && !(e < best.back())) return;
    best.insert(std::upper_bound(best.begin(), best.end(), e), e);
    if (static_cast<int>(best.size()) > k) best.pop_back();
  };

  std::vector<std::pair<std::int32_t, double>> stack{{0, 0.0}};
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > worst()) continue;
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (std::int32_t i = node.begin; i < node.end; ++i) offer(order_[i]);
      continue;
    }
    const double diff = q(node.axis) - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  std::vector<std::int32_t> out;
  out.reserve(best.size());
  for (const Entry& e : best) out.push_back(e.second);
  return out;
}

}  // namespace curvndf
