#include "curvndf/scene_oracle.hpp"

#include "curvndf/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace curvndf {
namespace {

constexpr double kCreaseTol = 1e-12;
constexpr double kTieTol = 1e-9;

OracleSample flat_sample(double value, Vec gradient, int dim, bool smooth) {
  OracleSample s;
  s.jet.value = value;
  s.jet.gradient = std::move(gradient);
  s.jet.hessian = Mat::Zero(dim, dim);
  s.smooth = smooth;
  return s;
}

// Distance to a point feature: value rho - radius, radial unit gradient and
// Hessian (I - u u^T) / rho.
OracleSample radial_sample(const Vec& x, const Vec& center, double radius) {
  const int m = static_cast<int>(x.size());
  const Vec diff = x - center;
  const double rho = diff.norm();
  OracleSample s;
  s.jet.value = rho - radius;
  if (rho < kCreaseTol) {
    Vec g = Vec::Zero(m);
    g(0) = 1.0;
    s.jet.gradient = g;
    s.jet.hessian = Mat::Zero(m, m);
    s.smooth = false;
    return s;
  }
  const Vec u = diff / rho;
  s.jet.gradient = u;
  s.jet.hessian = (Mat::Identity(m, m) - u * u.transpose()) / rho;
  return s;
}

OracleSample box_sample(const Primitive& p, const Vec& x) {
  const int m = static_cast<int>(x.size());
  const Vec rel = x - p.center;
  Vec s(m), q(m);
  for (int i = 0; i < m; ++i) {
    s(i) = rel(i) < 0.0 ? -1.0 : 1.0;
    q(i) = std::abs(rel(i)) - p.half_extents(i);
  }
  bool smooth = true;
  for (int i = 0; i < m; ++i) {
    if (std::abs(q(i)) < kCreaseTol) smooth = false;
  }
  if ((q.array() > 0.0).any()) {
    const Vec qp = q.cwiseMax(0.0);
    const double rho = qp.norm();
    const Vec u = qp / rho;
    OracleSample out;
    out.jet.value = rho;
    out.jet.gradient = s.cwiseProduct(u);
    out.jet.hessian = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      if (q(i) <= 0.0) continue;
      for (int j = 0; j < m; ++j) {
        if (q(j) <= 0.0) continue;
        out.jet.hessian(i, j) = s(i) * s(j) * ((i == j ? 1.0 : 0.0) - u(i) * u(j)) / rho;
      }
    }
    out.smooth = smooth;
    return out;
  }
  Eigen::Index best = 0;
  q.maxCoeff(&best);
  for (int i = 0; i < m; ++i) {
    if (i != best && q(best) - q(i) < kCreaseTol) smooth = false;
  }
  if (std::abs(rel(best)) < kCreaseTol) smooth = false;
  Vec g = Vec::Zero(m);
  g(best) = s(best);
  return flat_sample(q(best), g, m, smooth);
}

OracleSample polygon_sample(const Primitive& p, const Vec& x) {
  const auto n = p.vertices.size();
  // Inside: the largest signed line distance (exact for convex polygons).
  double best_line = -std::numeric_limits<double>::infinity();
  std::size_t best_edge = 0;
  bool line_tie = false;
  Vec best_normal;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec& a = p.vertices[k];
    const Vec& b = p.vertices[(k + 1) % n];
    const Vec e = b - a;
    Vec normal(2);
    normal << e(1), -e(0);
    normal /= e.norm();
    const double h = normal.dot(x - a);
    if (h > best_line + kCreaseTol) {
      best_line = h;
      best_edge = k;
      best_normal = normal;
      line_tie = false;
    } else if (std::abs(h - best_line) <= kCreaseTol) {
      line_tie = true;
    }
  }
  (void)best_edge;
  if (best_line <= 0.0) return flat_sample(best_line, best_normal, 2, !line_tie);

  // Outside: nearest feature over edges (interior) and vertices.
  double best = std::numeric_limits<double>::infinity();
  OracleSample out;
  long feature = -1;
  bool tie = false;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec& a = p.vertices[k];
    const Vec& b = p.vertices[(k + 1) % n];
    const Vec e = b - a;
    const double t = (x - a).dot(e) / e.squaredNorm();
    long id;
    OracleSample cand;
    if (t <= 0.0 || t >= 1.0) {
      const std::size_t v = t <= 0.0 ? k : (k + 1) % n;
      id = static_cast<long>(2 * v + 1);
      cand = radial_sample(x, p.vertices[v], 0.0);
    } else {
      Vec normal(2);
      normal << e(1), -e(0);
      normal /= e.norm();
      id = static_cast<long>(2 * k);
      // Unsigned distance to the segment; the nearest edge of an outside
      // point always faces it, so the sign only matters for far edges.
      const double h = normal.dot(x - a);
      cand = flat_sample(std::abs(h), h < 0.0 ? Vec(-normal) : normal, 2, true);
    }
    const double dist = cand.jet.value;
    if (dist < best - kCreaseTol) {
      best = dist;
      out = cand;
      feature = id;
      tie = false;
    } else if (std::abs(dist - best) <= kCreaseTol && id != feature) {
      tie = true;
    }
  }
  out.smooth = out.smooth && !tie;
  return out;
}

OracleSample primitive_sample(const Primitive& p, const Vec& x) {
  switch (p.kind) {
    case PrimitiveKind::Ball:
      return radial_sample(x, p.center, p.radius);
    case PrimitiveKind::Plane:
      return flat_sample(p.normal.dot(x) - p.offset, p.normal, static_cast<int>(x.size()), true);
    case PrimitiveKind::Box:
      return box_sample(p, x);
    case PrimitiveKind::ConvexPolygon:
      return polygon_sample(p, x);
  }
  throw SceneError("unknown primitive");
}

double signed_area(const std::vector<Vec>& v) {
  double a = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Vec& p = v[k];
    const Vec& q = v[(k + 1) % v.size()];
    a += p(0) * q(1) - q(0) * p(1);
  }
  return 0.5 * a;
}

}  // namespace

AnalyticScene::AnalyticScene(int dim) : dim_(dim) { check_dim(dim); }

AnalyticScene& AnalyticScene::add_ball(const Vec& center, double radius) {
  if (center.size() != dim_ || !all_finite(center) || !(radius > 0.0) || !std::isfinite(radius)) {
    throw SceneError("invalid sphere/circle");
  }
  Primitive p;
  p.kind = PrimitiveKind::Ball;
  p.center = center;
  p.radius = radius;
  primitives_.push_back(std::move(p));
  return *this;
}

AnalyticScene& AnalyticScene::add_plane(const Vec& normal, double offset) {
  const double len = normal.norm();
  if (normal.size() != dim_ || !all_finite(normal) || !(len > 0.0) || !std::isfinite(offset)) {
    throw SceneError("invalid plane");
  }
  Primitive p;
  p.kind = PrimitiveKind::Plane;
  p.normal = normal / len;
  p.offset = offset / len;
  primitives_.push_back(std::move(p));
  return *this;
}

AnalyticScene& AnalyticScene::add_box(const Vec& center, const Vec& half_extents) {
  if (center.size() != dim_ || half_extents.size() != dim_ || !all_finite(center) ||
      !all_finite(half_extents) || !(half_extents.array() > 0.0).all()) {
    throw SceneError("invalid box");
  }
  Primitive p;
  p.kind = PrimitiveKind::Box;
  p.center = center;
  p.half_extents = half_extents;
  primitives_.push_back(std::move(p));
  return *this;
}

AnalyticScene& AnalyticScene::add_polygon(std::vector<Vec> vertices) {
  if (dim_ != 2) throw SceneError("polygons are 2D only");
  if (vertices.size() < 3) throw SceneError("polygon needs at least 3 vertices");
  for (const Vec& v : vertices) {
    if (v.size() != 2 || !all_finite(v)) throw SceneError("invalid polygon vertex");
  }
  const double area = signed_area(vertices);
  if (std::abs(area) < 1e-12) throw SceneError("degenerate polygon");
  if (area < 0.0) std::reverse(vertices.begin(), vertices.end());
  const std::size_t n = vertices.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec e1 = vertices[(k + 1) % n] - vertices[k];
    const Vec e2 = vertices[(k + 2) % n] - vertices[(k + 1) % n];
    if (e1(0) * e2(1) - e1(1) * e2(0) <= 0.0) throw SceneError("polygon must be strictly convex");
  }
  Primitive p;
  p.kind = PrimitiveKind::ConvexPolygon;
  p.vertices = std::move(vertices);
  primitives_.push_back(std::move(p));
  return *this;
}

double AnalyticScene::sdf(const Vec& x) const { return evaluate(x).jet.value; }

OracleSample AnalyticScene::evaluate(const Vec& x) const {
  if (primitives_.empty()) throw SceneError("scene has no primitives");
  if (x.size() != dim_) throw SceneError("query dimension does not match scene");
  OracleSample best;
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    OracleSample s = primitive_sample(primitives_[i], x);
    if (i == 0 || s.jet.value < best.jet.value) {
      if (i > 0) second = best.jet.value;
      best = std::move(s);
      best.active = static_cast<int>(i);
    } else {
      second = std::min(second, s.jet.value);
    }
  }
  if (second - best.jet.value < kTieTol) best.smooth = false;
  return best;
}

namespace {

std::vector<double> read_numbers(std::istringstream& ss, const std::string& line) {
  std::vector<double> vals;
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      vals.push_back(v);
    } catch (const std::exception&) {
      throw SceneError("bad number '" + tok + "' in line: " + line);
    }
  }
  return vals;
}

Vec vec_of(const std::vector<double>& v, std::size_t start, std::size_t n) {
  Vec out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = v[start + i];
  return out;
}

}  // namespace

AnalyticScene AnalyticScene::parse(std::istream& in) {
  struct Entry {
    std::string kind;
    std::vector<double> vals;
    std::string line;
  };
  std::vector<Entry> entries;
  int dim = 0;
  std::string line;
  int lineno = 0;
  auto infer = [&](int d, const std::string& l) {
    if (dim == 0) dim = d;
    if (dim != d) throw SceneError("line " + std::to_string(lineno) + " mixes dimensions: " + l);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = hash == std::string::npos ? line : line.substr(0, hash);
    std::istringstream ss(body);
    std::string kind;
    if (!(ss >> kind)) continue;
    std::vector<double> vals = read_numbers(ss, line);
    if (kind == "dim") {
      if (vals.size() != 1 || (vals[0] != 2.0 && vals[0] != 3.0)) {
        throw SceneError("dim must be 2 or 3");
      }
      infer(static_cast<int>(vals[0]), line);
      continue;
    }
    if (kind == "sphere" && vals.size() == 4) {
      infer(3, line);
    } else if (kind == "circle" && vals.size() == 3) {
      infer(2, line);
    } else if (kind == "box" && (vals.size() == 6 || vals.size() == 4)) {
      infer(static_cast<int>(vals.size() / 2), line);
    } else if (kind == "plane" && (vals.size() == 4 || vals.size() == 3)) {
      infer(static_cast<int>(vals.size() - 1), line);
    } else if (kind == "polygon" && vals.size() >= 6 && vals.size() % 2 == 0) {
      infer(2, line);
    } else {
      throw SceneError("line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
    entries.push_back({kind, std::move(vals), line});
  }
  if (dim == 0 || entries.empty()) throw SceneError("scene file has no primitives");
  AnalyticScene scene(dim);
  for (const Entry& e : entries) {
    const auto d = static_cast<std::size_t>(dim);
    if (e.kind == "sphere" || e.kind == "circle") {
      scene.add_ball(vec_of(e.vals, 0, d), e.vals[d]);
    } else if (e.kind == "box") {
      scene.add_box(vec_of(e.vals, 0, d), vec_of(e.vals, d, d));
    } else if (e.kind == "plane") {
      scene.add_plane(vec_of(e.vals, 0, d), e.vals[d]);
    } else {
      std::vector<Vec> verts;
      for (std::size_t i = 0; i < e.vals.size(); i += 2) verts.push_back(vec_of(e.vals, i, 2));
      scene.add_polygon(std::move(verts));
    }
  }
  return scene;
}

AnalyticScene AnalyticScene::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open scene file " + path.string());
  return parse(in);
}

void AnalyticScene::write(std::ostream& out) const {
  out << std::setprecision(17) << "dim " << dim_ << "\n";
  auto put = [&](const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v(i);
  };
  for (const Primitive& p : primitives_) {
    switch (p.kind) {
      case PrimitiveKind::Ball:
        out << (dim_ == 3 ? "sphere" : "circle");
        put(p.center);
        out << ' ' << p.radius;
        break;
      case PrimitiveKind::Plane:
        out << "plane";
        put(p.normal);
        out << ' ' << p.offset;
        break;
      case PrimitiveKind::Box:
        out << "box";
        put(p.center);
        put(p.half_extents);
        break;
      case PrimitiveKind::ConvexPolygon:
        out << "polygon";
        for (const Vec& v : p.vertices) put(v);
        break;
    }
    out << '\n';
  }
}

double oracle_sdf(const AnalyticScene& scene, const Vec& x) { return scene.sdf(x); }

FieldJet oracle_jet(const AnalyticScene& scene, const Vec& x) { return scene.jet(x); }

void ScannerConfig::validate() const {
  if (beams < 1) throw std::invalid_argument("scanner needs at least one beam");
  if (!(max_range > 0.0)) throw std::invalid_argument("scanner max range must be positive");
  if (!(fov > 0.0)) throw std::invalid_argument("scanner field of view must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("range noise must be non-negative");
}

std::vector<Vec> beam_directions(int dim, const ScannerConfig& cfg) {
  check_dim(dim);
  cfg.validate();
  std::vector<Vec> dirs;
  dirs.reserve(static_cast<std::size_t>(cfg.beams));
  const double two_pi = 2.0 * std::numbers::pi;
  if (dim == 2) {
    const bool full = cfg.fov >= two_pi - 1e-12;
    for (int k = 0; k < cfg.beams; ++k) {
      double a = 0.0;
      if (full) {
        a = -std::numbers::pi + two_pi * k / cfg.beams;
      } else if (cfg.beams > 1) {
        a = -0.5 * cfg.fov + cfg.fov * k / (cfg.beams - 1);
      }
      dirs.push_back(make_point({std::cos(a), std::sin(a)}));
    }
    return dirs;
  }
  const double half = std::min(0.5 * cfg.fov, std::numbers::pi);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < cfg.beams; ++k) {
    // Beam 0 is the +x axis; the last beam lies on the cone rim.
    const double u = cfg.beams > 1 ? static_cast<double>(k) / (cfg.beams - 1) : 0.0;
    const double cos_t = 1.0 - (1.0 - std::cos(half)) * u;
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = golden * k;
    dirs.push_back(make_point({cos_t, sin_t * std::cos(phi), sin_t * std::sin(phi)}));
  }
  return dirs;
}

Scan simulate_scan(const AnalyticScene& scene, const Pose& pose, const ScannerConfig& cfg,
                   std::uint64_t scan_index) {
  if (pose.dim() != scene.dim()) throw SceneError("pose dimension does not match scene");
  const Vec& origin = pose.translation();
  if (!(scene.sdf(origin) > 0.0)) throw SceneError("sensor origin is not in free space");
  std::mt19937_64 rng(mix_seed(cfg.seed, scan_index));
  Scan scan{pose, {}};
  for (const Vec& dir_s : beam_directions(scene.dim(), cfg)) {
    const Vec dir = pose.rotation() * dir_s;
    double t = 0.0;
    bool hit = false;
    for (int step = 0; step < 10000 && t <= cfg.max_range; ++step) {
      const double dist = scene.sdf(origin + t * dir);
      if (std::abs(dist) < 1e-6) {
        hit = true;
        break;
      }
      t += 0.99 * dist;
    }
    if (!hit || t > cfg.max_range) continue;
    double range = t;
    if (cfg.noise_sigma > 0.0) range = std::max(1e-9, range + cfg.noise_sigma * gaussian(rng));
    scan.points.push_back(range * dir_s);
  }
  if (scan.points.empty()) throw SceneError("every beam missed the scene");
  return scan;
}

}  // namespace curvndf
