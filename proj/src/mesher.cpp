#include "curvndf/mesher.hpp"

#include "curvndf/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace curvndf {

// ---------------------------------------------------------------------------
// Grid sampling
// ---------------------------------------------------------------------------

std::size_t ScalarGrid::size() const {
  std::size_t n = 1;
  for (int r : res) n *= static_cast<std::size_t>(r);
  return n;
}

double ScalarGrid::spacing(int axis) const {
  return (box.max(axis) - box.min(axis)) / (res[static_cast<std::size_t>(axis)] - 1);
}

std::size_t ScalarGrid::index(const std::array<int, 3>& ijk) const {
  std::size_t idx = 0;
  for (int a = dim() - 1; a >= 0; --a) {
    idx = idx * static_cast<std::size_t>(res[static_cast<std::size_t>(a)]) +
          static_cast<std::size_t>(ijk[static_cast<std::size_t>(a)]);
  }
  return idx;
}

Vec ScalarGrid::point(const std::array<int, 3>& ijk) const {
  Vec p(dim());
  for (int a = 0; a < dim(); ++a) {
    p(a) = box.min(a) + spacing(a) * ijk[static_cast<std::size_t>(a)];
  }
  return p;
}

void ScalarGrid::validate() const {
  check_dim(dim());
  box.validate();
  if (box.dim() != dim()) throw std::invalid_argument("grid box and resolution dimensions differ");
  for (int r : res) {
    if (r < 2) throw std::invalid_argument("grid resolution must be at least 2 per axis");
  }
  if (values.size() != size()) throw std::invalid_argument("grid value count does not match resolution");
}

ScalarGrid sample_grid(const BatchField& field, const Aabb& box, const std::vector<int>& res,
                       int threads) {
  ScalarGrid grid{box, res, {}};
  grid.values.assign(grid.size(), 0.0);
  grid.validate();

  const int m = grid.dim();
  constexpr std::size_t kChunk = 4096;
  const std::size_t total = grid.size();
  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    {
      const std::size_t begin = c * kChunk;
      const std::size_t count = std::min(kChunk, total - begin);
      Eigen::MatrixXd pts(m, static_cast<Eigen::Index>(count));
      for (std::size_t k = 0; k < count; ++k) {
        std::size_t rem = begin + k;
        for (int a = 0; a < m; ++a) {
          const auto r = static_cast<std::size_t>(res[static_cast<std::size_t>(a)]);
          pts(a, static_cast<Eigen::Index>(k)) =
              box.min(a) + grid.spacing(a) * static_cast<double>(rem % r);
          rem /= r;
        }
      }
      const Eigen::VectorXd v = field(pts);
      if (v.size() != pts.cols()) throw std::runtime_error("field returned the wrong number of values");
      std::copy(v.data(), v.data() + v.size(), grid.values.begin() + static_cast<std::ptrdiff_t>(begin));
    }
  });
  return grid;
}

namespace {

// ---------------------------------------------------------------------------
// Cube topology. Corner i sits at (i&1, i>>1&1, i>>2&1). Edge a*4+k joins the
// k-th corner with bit a clear to its neighbour along axis a. Face a*2+s is
// the face with bit a equal to s; its corners are listed counter-clockwise
// as seen from outside the cube.
// ---------------------------------------------------------------------------

struct CubeTopology {
  std::array<std::array<int, 2>, 12> edge_corners{};
  std::array<std::array<int, 8>, 8> edge_between{};
  std::array<int, 12> edge_axis{};
  std::array<std::array<int, 4>, 6> face_corners{};
  std::array<std::array<int, 4>, 6> face_edges{};  // edge k joins corner k and k+1
};

const CubeTopology& topology() {
  static const CubeTopology topo = [] {
    CubeTopology t;
    for (auto& row : t.edge_between) row.fill(-1);
    for (int a = 0; a < 3; ++a) {
      int k = 0;
      for (int c = 0; c < 8; ++c) {
        if (c & (1 << a)) continue;
        const int e = a * 4 + k++;
        const int d = c | (1 << a);
        t.edge_corners[static_cast<std::size_t>(e)] = {c, d};
        t.edge_axis[static_cast<std::size_t>(e)] = a;
        t.edge_between[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] = e;
        t.edge_between[static_cast<std::size_t>(d)][static_cast<std::size_t>(c)] = e;
      }
    }
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3;
      const int c = (a + 2) % 3;
      for (int s = 0; s < 2; ++s) {
        std::array<int, 4> q{};
        const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        for (int k = 0; k < 4; ++k) {
          q[static_cast<std::size_t>(k)] = (s << a) | (uv[k][0] << b) | (uv[k][1] << c);
        }
        // (b, c) order is counter-clockwise about +a; the s = 0 face looks along -a.
        if (s == 0) std::reverse(q.begin(), q.end());
        const auto f = static_cast<std::size_t>(a * 2 + s);
        t.face_corners[f] = q;
        for (std::size_t k = 0; k < 4; ++k) {
          t.face_edges[f][k] =
              t.edge_between[static_cast<std::size_t>(q[k])][static_cast<std::size_t>(q[(k + 1) % 4])];
        }
      }
    }
    return t;
  }();
  return topo;
}

/// Bitmask of faces whose corners alternate in sign.
int ambiguous_faces(int mask) {
  const CubeTopology& topo = topology();
  int out = 0;
  for (std::size_t f = 0; f < 6; ++f) {
    int changes = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const bool p0 = (mask >> topo.face_corners[f][k]) & 1;
      const bool p1 = (mask >> topo.face_corners[f][(k + 1) % 4]) & 1;
      changes += p0 != p1;
    }
    if (changes == 4) out |= 1 << f;
  }
  return out;
}

/// Walks the isoline on every face and links the segments into loops. Each
/// segment keeps the positive corners on its left when the face is seen from
/// outside, which orients every loop counter-clockwise about the normal that
/// points into the positive region. `joined` has bit f set when face f's
/// positive corners are connected across the face centre.
std::vector<std::vector<int>> walk_cube(int mask, int joined) {
  const CubeTopology& topo = topology();
  std::array<int, 12> next{};
  next.fill(-1);
  for (std::size_t f = 0; f < 6; ++f) {
    std::array<int, 4> crossing{};
    std::array<bool, 4> is_start{};
    int n = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const bool p0 = (mask >> topo.face_corners[f][k]) & 1;
      const bool p1 = (mask >> topo.face_corners[f][(k + 1) % 4]) & 1;
      if (p0 == p1) continue;
      crossing[static_cast<std::size_t>(n)] = topo.face_edges[f][k];
      is_start[static_cast<std::size_t>(n)] = p0;
      ++n;
    }
    if (n == 2) {
      const int s = is_start[0] ? 0 : 1;
      next[static_cast<std::size_t>(crossing[static_cast<std::size_t>(s)])] =
          crossing[static_cast<std::size_t>(1 - s)];
    } else if (n == 4) {
      const int step = ((joined >> f) & 1) ? 1 : 3;
      for (int i = 0; i < 4; ++i) {
        if (!is_start[static_cast<std::size_t>(i)]) continue;
        next[static_cast<std::size_t>(crossing[static_cast<std::size_t>(i)])] =
            crossing[static_cast<std::size_t>((i + step) % 4)];
      }
    }
  }
  std::vector<std::vector<int>> loops;
  std::array<bool, 12> seen{};
  for (int e = 0; e < 12; ++e) {
    if (next[static_cast<std::size_t>(e)] < 0 || seen[static_cast<std::size_t>(e)]) continue;
    std::vector<int> loop;
    int cur = e;
    while (!seen[static_cast<std::size_t>(cur)]) {
      seen[static_cast<std::size_t>(cur)] = true;
      loop.push_back(cur);
      cur = next[static_cast<std::size_t>(cur)];
      if (cur < 0) throw std::logic_error("open isosurface loop in cube walk");
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

struct VertexKeyHash {
  std::size_t operator()(std::uint64_t k) const { return std::hash<std::uint64_t>{}(k * 0x9E3779B97F4A7C15ULL); }
};

/// Shared-vertex bookkeeping. Edge crossings are keyed by (grid corner,
/// axis); crossings that land exactly on a grid sample are keyed by that
/// sample so neighbouring edges reuse one vertex.
class VertexCache {
 public:
  explicit VertexCache(const ScalarGrid& grid) : grid_(grid) {}

  int crossing(const std::array<int, 3>& g0, int axis) {
    std::array<int, 3> g1 = g0;
    ++g1[static_cast<std::size_t>(axis)];
    const std::size_t i0 = grid_.index(g0);
    const std::size_t i1 = grid_.index(g1);
    const double v0 = grid_.values[i0];
    const double v1 = grid_.values[i1];
    const double t = v0 / (v0 - v1);
    if (v0 == 0.0) return corner(g0, i0);
    if (v1 == 0.0) return corner(g1, i1);
    const std::uint64_t key = static_cast<std::uint64_t>(i0) * 4 + static_cast<std::uint64_t>(axis);
    auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(vertices.size()));
    if (inserted) {
      const Vec p0 = grid_.point(g0);
      const Vec p1 = grid_.point(g1);
      vertices.push_back(p0 + t * (p1 - p0));
    }
    return it->second;
  }

  std::vector<Vec> vertices;

 private:
  int corner(const std::array<int, 3>& g, std::size_t idx) {
    const std::uint64_t key = static_cast<std::uint64_t>(idx) * 4 + 3;
    auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(vertices.size()));
    if (inserted) vertices.push_back(grid_.point(g));
    return it->second;
  }

  const ScalarGrid& grid_;
  std::unordered_map<std::uint64_t, int, VertexKeyHash> ids_;
};

/// Face-centre field values for every ambiguous face, keyed by
/// (lower grid corner of the face, face axis).
std::unordered_map<std::uint64_t, double, VertexKeyHash> sample_face_centres(
    const ScalarGrid& grid, const std::vector<std::pair<std::uint64_t, Vec>>& faces,
    const BatchField& field) {
  std::unordered_map<std::uint64_t, double, VertexKeyHash> out;
  if (faces.empty()) return out;
  Eigen::MatrixXd pts(grid.dim(), static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = faces[i].second;
  const Eigen::VectorXd v = field(pts);
  if (v.size() != pts.cols()) throw std::runtime_error("field returned the wrong number of values");
  for (std::size_t i = 0; i < faces.size(); ++i) out.emplace(faces[i].first, v(static_cast<Eigen::Index>(i)));
  return out;
}

bool positive(double v) { return v >= 0.0; }

double triangle_area(const Vec& a, const Vec& b, const Vec& c) {
  const Eigen::Vector3d u(b(0) - a(0), b(1) - a(1), b(2) - a(2));
  const Eigen::Vector3d w(c(0) - a(0), c(1) - a(1), c(2) - a(2));
  return 0.5 * u.cross(w).norm();
}

}  // namespace

const std::array<CubeCase, 256>& cube_case_table() {
  static const std::array<CubeCase, 256> table = [] {
    std::array<CubeCase, 256> t;
    for (int mask = 0; mask < 256; ++mask) t[static_cast<std::size_t>(mask)].loops = walk_cube(mask, 0);
    return t;
  }();
  return table;
}

TriangleMesh contour_grid(const ScalarGrid& grid, const BatchField* face_field) {
  grid.validate();
  if (grid.dim() != 3) throw std::invalid_argument("marching cubes needs a 3D grid");
  const CubeTopology& topo = topology();
  const auto& table = cube_case_table();
  const int nx = grid.res[0] - 1;
  const int ny = grid.res[1] - 1;
  const int nz = grid.res[2] - 1;

  auto cell_mask = [&](int i, int j, int k) {
    int mask = 0;
    for (int c = 0; c < 8; ++c) {
      const std::array<int, 3> g{i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)};
      if (positive(grid.values[grid.index(g)])) mask |= 1 << c;
    }
    return mask;
  };
  auto face_key = [&](int i, int j, int k, int f) {
    const int a = f / 2;
    std::array<int, 3> g{i, j, k};
    g[static_cast<std::size_t>(a)] += f % 2;
    return static_cast<std::uint64_t>(grid.index(g)) * 3 + static_cast<std::uint64_t>(a);
  };

  std::unordered_map<std::uint64_t, double, VertexKeyHash> centres;
  if (face_field != nullptr) {
    std::vector<std::pair<std::uint64_t, Vec>> faces;
    std::unordered_map<std::uint64_t, bool, VertexKeyHash> queued;
    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const int amb = ambiguous_faces(cell_mask(i, j, k));
          for (int f = 0; f < 6; ++f) {
            if (!((amb >> f) & 1)) continue;
            const std::uint64_t key = face_key(i, j, k, f);
            if (!queued.emplace(key, true).second) continue;
            Vec p = grid.point({i, j, k});
            for (int a = 0; a < 3; ++a) p(a) += grid.spacing(a) * (a == f / 2 ? f % 2 : 0.5);
            faces.emplace_back(key, p);
          }
        }
      }
    }
    centres = sample_face_centres(grid, faces, *face_field);
  }

  TriangleMesh mesh;
  VertexCache cache(grid);
  std::vector<int> ids;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int mask = cell_mask(i, j, k);
        if (mask == 0 || mask == 255) continue;
        const int amb = face_field != nullptr ? ambiguous_faces(mask) : 0;
        std::vector<std::vector<int>> dynamic;
        const std::vector<std::vector<int>>* loops = &table[static_cast<std::size_t>(mask)].loops;
        if (amb != 0) {
          int joined = 0;
          for (int f = 0; f < 6; ++f) {
            if (((amb >> f) & 1) && positive(centres.at(face_key(i, j, k, f)))) joined |= 1 << f;
          }
          dynamic = walk_cube(mask, joined);
          loops = &dynamic;
        }
        for (const auto& loop : *loops) {
          ids.clear();
          for (int e : loop) {
            const int c0 = topo.edge_corners[static_cast<std::size_t>(e)][0];
            const std::array<int, 3> g0{i + (c0 & 1), j + ((c0 >> 1) & 1), k + ((c0 >> 2) & 1)};
            const int id = cache.crossing(g0, topo.edge_axis[static_cast<std::size_t>(e)]);
            if (ids.empty() || ids.back() != id) ids.push_back(id);
          }
          while (ids.size() > 1 && ids.front() == ids.back()) ids.pop_back();
          for (std::size_t t = 1; t + 1 < ids.size(); ++t) {
            const std::array<int, 3> tri{ids[0], ids[t], ids[t + 1]};
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
            const auto& v = cache.vertices;
            if (triangle_area(v[static_cast<std::size_t>(tri[0])], v[static_cast<std::size_t>(tri[1])],
                              v[static_cast<std::size_t>(tri[2])]) <= 1e-12) {
              continue;
            }
            mesh.triangles.push_back(tri);
          }
        }
      }
    }
  }
  mesh.vertices = std::move(cache.vertices);
  return mesh;
}

TriangleMesh marching_cubes(const BatchField& field, const Aabb& box, int cells, int threads) {
  if (cells < 1) throw std::invalid_argument("marching cubes needs at least one cell per axis");
  const ScalarGrid grid = sample_grid(field, box, {cells + 1, cells + 1, cells + 1}, threads);
  return contour_grid(grid, &field);
}

// ---------------------------------------------------------------------------
// Marching squares
// ---------------------------------------------------------------------------

std::size_t Polylines::segment_count() const {
  std::size_t n = 0;
  for (const auto& l : lines) {
    if (l.indices.size() < 2) continue;
    n += l.indices.size() - 1 + (l.closed ? 1 : 0);
  }
  return n;
}

Polylines contour_grid_2d(const ScalarGrid& grid, const BatchField* face_field) {
  grid.validate();
  if (grid.dim() != 2) throw std::invalid_argument("marching squares needs a 2D grid");
  const int nx = grid.res[0] - 1;
  const int ny = grid.res[1] - 1;
  // Counter-clockwise cell corners and the axis / lower corner of each side.
  const int corner_dx[4] = {0, 1, 1, 0};
  const int corner_dy[4] = {0, 0, 1, 1};

  auto sign_at = [&](int i, int j, int c) {
    return positive(grid.values[grid.index({i + corner_dx[c], j + corner_dy[c], 0})]);
  };
  auto ambiguous = [&](int i, int j) {
    return sign_at(i, j, 0) == sign_at(i, j, 2) && sign_at(i, j, 1) == sign_at(i, j, 3) &&
           sign_at(i, j, 0) != sign_at(i, j, 1);
  };

  std::map<std::pair<int, int>, bool> joined;
  if (face_field != nullptr) {
    std::vector<std::pair<std::uint64_t, Vec>> cells;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (!ambiguous(i, j)) continue;
        Vec p = grid.point({i, j, 0});
        p(0) += 0.5 * grid.spacing(0);
        p(1) += 0.5 * grid.spacing(1);
        cells.emplace_back(static_cast<std::uint64_t>(grid.index({i, j, 0})), p);
      }
    }
    const auto centres = sample_face_centres(grid, cells, *face_field);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (!ambiguous(i, j)) continue;
        joined[{i, j}] = positive(centres.at(static_cast<std::uint64_t>(grid.index({i, j, 0}))));
      }
    }
  }

  VertexCache cache(grid);
  std::vector<std::pair<int, int>> segments;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      std::array<int, 4> crossing{};
      std::array<bool, 4> is_start{};
      int n = 0;
      for (int s = 0; s < 4; ++s) {
        const bool p0 = sign_at(i, j, s);
        const bool p1 = sign_at(i, j, (s + 1) % 4);
        if (p0 == p1) continue;
        const int c0 = (s < 2) ? s : (s + 1) % 4;  // lower corner of the side
        const int axis = (s % 2 == 0) ? 0 : 1;
        const std::array<int, 3> g0{i + corner_dx[c0], j + corner_dy[c0], 0};
        crossing[static_cast<std::size_t>(n)] = cache.crossing(g0, axis);
        is_start[static_cast<std::size_t>(n)] = p0;
        ++n;
      }
      // Segments run from a rising crossing to a falling one so the
      // positive side lies to the right of the direction of travel.
      auto emit = [&](int from, int to) {
        const int a = crossing[static_cast<std::size_t>(to)];
        const int b = crossing[static_cast<std::size_t>(from)];
        if (a != b) segments.emplace_back(a, b);
      };
      if (n == 2) {
        const int s = is_start[0] ? 0 : 1;
        emit(s, 1 - s);
      } else if (n == 4) {
        const auto it = joined.find({i, j});
        const int step = (it != joined.end() && it->second) ? 1 : 3;
        for (int c = 0; c < 4; ++c) {
          if (is_start[static_cast<std::size_t>(c)]) emit(c, (c + step) % 4);
        }
      }
    }
  }

  Polylines out;
  out.vertices = std::move(cache.vertices);
  const std::size_t nv = out.vertices.size();
  std::vector<std::vector<std::size_t>> outgoing(nv);
  std::vector<int> indegree(nv, 0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    outgoing[static_cast<std::size_t>(segments[s].first)].push_back(s);
    ++indegree[static_cast<std::size_t>(segments[s].second)];
  }
  std::vector<bool> used(segments.size(), false);
  auto trace = [&](std::size_t first) {
    Polyline line;
    line.indices.push_back(segments[first].first);
    std::size_t s = first;
    while (true) {
      used[s] = true;
      const int v = segments[s].second;
      if (v == line.indices.front()) {
        line.closed = true;
        break;
      }
      line.indices.push_back(v);
      std::size_t nxt = segments.size();
      for (std::size_t cand : outgoing[static_cast<std::size_t>(v)]) {
        if (!used[cand]) {
          nxt = cand;
          break;
        }
      }
      if (nxt == segments.size()) break;
      s = nxt;
    }
    out.lines.push_back(std::move(line));
  };
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s] && indegree[static_cast<std::size_t>(segments[s].first)] == 0) trace(s);
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) trace(s);
  }
  return out;
}

Polylines marching_squares(const BatchField& field, const Aabb& box, int cells, int threads) {
  if (cells < 1) throw std::invalid_argument("marching squares needs at least one cell per axis");
  const ScalarGrid grid = sample_grid(field, box, {cells + 1, cells + 1}, threads);
  return contour_grid_2d(grid, &field);
}

// ---------------------------------------------------------------------------
// Topology checks
// ---------------------------------------------------------------------------

namespace {

std::map<std::pair<int, int>, int> edge_use(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> use;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      ++use[{std::min(a, b), std::max(a, b)}];
    }
  }
  return use;
}

}  // namespace

long euler_characteristic(const TriangleMesh& mesh) {
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(edge_use(mesh).size()) +
         static_cast<long>(mesh.triangles.size());
}

std::size_t non_manifold_edges(const TriangleMesh& mesh) {
  std::size_t n = 0;
  for (const auto& [edge, count] : edge_use(mesh)) n += count != 2;
  return n;
}

}  // namespace curvndf
