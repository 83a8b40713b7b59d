#pragma once

#include "curvndf/geom.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <vector>

namespace curvndf {

/// Batched scalar field: columns of the argument are query points (m x B).
using BatchField = std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::MatrixXd>&)>;

/// Regular sample grid. res[i] samples per axis, spanning the box corners
/// inclusive; values are stored x-fastest.
struct ScalarGrid {
  Aabb box;
  std::vector<int> res;
  std::vector<double> values;

  int dim() const { return static_cast<int>(res.size()); }
  std::size_t size() const;
  double spacing(int axis) const;
  std::size_t index(const std::array<int, 3>& ijk) const;
  Vec point(const std::array<int, 3>& ijk) const;
  void validate() const;
};

/// Evaluates `field` at every grid sample, in chunks spread across threads.
ScalarGrid sample_grid(const BatchField& field, const Aabb& box, const std::vector<int>& res,
                       int threads = 1);

struct TriangleMesh {
  std::vector<Vec> vertices;
  std::vector<std::array<int, 3>> triangles;
};

struct Polyline {
  std::vector<int> indices;
  bool closed = false;
};

struct Polylines {
  std::vector<Vec> vertices;
  std::vector<Polyline> lines;

  std::size_t segment_count() const;
};

/// Zero isosurface of a sampled field. Cells with an ambiguous face (two
/// diagonal corners on each side) are resolved by the sign of `face_field`
/// at the face centre; without it the case table's default applies, which
/// keeps the positive corners apart. Triangles wind counter-clockwise when
/// seen from the side where the field is positive; exact-zero samples count
/// as positive.
TriangleMesh contour_grid(const ScalarGrid& grid, const BatchField* face_field = nullptr);

/// Samples `field` on (cells + 1)^3 points over `box` and contours it.
TriangleMesh marching_cubes(const BatchField& field, const Aabb& box, int cells,
                            int threads = 1);

/// 2D analogue: polylines traversed with the positive side on the right, so
/// closed loops run counter-clockwise around negative regions.
Polylines contour_grid_2d(const ScalarGrid& grid, const BatchField* face_field = nullptr);
Polylines marching_squares(const BatchField& field, const Aabb& box, int cells, int threads = 1);

/// V - E + F, counting each undirected edge once.
long euler_characteristic(const TriangleMesh& mesh);

/// Number of undirected edges not shared by exactly two triangles.
std::size_t non_manifold_edges(const TriangleMesh& mesh);

/// Edge lists of the generated 256-case table: for each corner sign mask
/// (bit i set when corner i is positive, corner i at offset (i&1, i>>1&1,
/// i>>2&1)), the closed loops of crossed cube edges.
struct CubeCase {
  std::vector<std::vector<int>> loops;
};
const std::array<CubeCase, 256>& cube_case_table();

}  // namespace curvndf
