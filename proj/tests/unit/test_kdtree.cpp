#include "curvndf/kdtree.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace curvndf;

TEST_CASE("k nearest neighbours agree with brute force") {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 500);
  const KdTree tree(pts);
  for (std::int32_t q = 0; q < 500; q += 37) {
    std::vector<std::int32_t> idx(500);
    std::iota(idx.begin(), idx.end(), 0);
    idx.erase(idx.begin() + q);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return (pts.col(a) - pts.col(q)).squaredNorm() < (pts.col(b) - pts.col(q)).squaredNorm();
    });
    idx.resize(4);
    CHECK(tree.nearest_excluding(q, 4) == idx);
  }
}

TEST_CASE("ties are broken by index") {
  Eigen::MatrixXd pts(2, 5);
  pts << 0, 1, -1, 0, 0,
         0, 0, 0, 1, -1;
  const KdTree tree(pts);
  CHECK(tree.nearest_excluding(0, 4) == std::vector<std::int32_t>{1, 2, 3, 4});
  CHECK(tree.nearest_excluding(0, 2) == std::vector<std::int32_t>{1, 2});
}

TEST_CASE("k larger than the point count returns everything else") {
  Eigen::MatrixXd pts(1, 3);
  pts << 0, 5, 1;
  const KdTree tree(pts);
  CHECK(tree.nearest_excluding(0, 10) == std::vector<std::int32_t>{2, 1});
}
