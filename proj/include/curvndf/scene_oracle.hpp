#pragma once

#include "curvndf/field_net.hpp"
#include "curvndf/geom.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvndf {

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PrimitiveKind { Ball, Plane, Box, ConvexPolygon };

/// Ball is a sphere in 3D and a circle in 2D; Plane is a line in 2D.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Ball;
  Vec center;                 // Ball, Box
  double radius = 0.0;        // Ball
  Vec normal;                 // Plane, unit
  double offset = 0.0;        // Plane: n.x - offset
  Vec half_extents;           // Box
  std::vector<Vec> vertices;  // ConvexPolygon, counter-clockwise
};

/// Oracle evaluation. `smooth` is false on creases: box edges/corners and
/// region boundaries, polygon feature ties, ball centres, and union ties. At
/// such points the derivatives come from the active primitive.
struct OracleSample {
  FieldJet jet;
  bool smooth = true;
  int active = 0;  // index of the minimising primitive (lowest on ties)
};

/// Union (pointwise minimum) of exact SDF primitives.
class AnalyticScene {
 public:
  explicit AnalyticScene(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return primitives_.size(); }
  const std::vector<Primitive>& primitives() const { return primitives_; }

  AnalyticScene& add_ball(const Vec& center, double radius);
  AnalyticScene& add_plane(const Vec& normal, double offset);
  AnalyticScene& add_box(const Vec& center, const Vec& half_extents);
  AnalyticScene& add_polygon(std::vector<Vec> vertices);

  double sdf(const Vec& x) const;
  OracleSample evaluate(const Vec& x) const;
  FieldJet jet(const Vec& x) const { return evaluate(x).jet; }

  /// Text format, one primitive per line, implicit union:
  ///   sphere cx cy cz r | circle cx cy r
  ///   box cx cy cz hx hy hz | box cx cy hx hy
  ///   plane nx ny nz d | plane nx ny d
  ///   polygon x1 y1 x2 y2 x3 y3 ...
  /// Blank lines and '#' comments are ignored; an optional `dim N` line fixes
  /// the dimension.
  static AnalyticScene parse(std::istream& in);
  static AnalyticScene load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

 private:
  int dim_;
  std::vector<Primitive> primitives_;
};

double oracle_sdf(const AnalyticScene& scene, const Vec& x);
FieldJet oracle_jet(const AnalyticScene& scene, const Vec& x);

struct ScannerConfig {
  int beams = 64;
  double fov = 1.2217304763960306;  // radians; 70 degrees
  double max_range = 10.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Unit beam directions in the sensor frame. 2D: a fan centred on +x (full
/// circle when fov >= 2 pi). 3D: a Fibonacci pattern over the cone of half
/// angle fov / 2 around +x.
std::vector<Vec> beam_directions(int dim, const ScannerConfig& cfg);

/// Sphere-traces every beam (step factor 0.99, at most 1e4 steps, hit when
/// |sdf| < 1e-6). Misses are dropped; range noise is seeded per scan_index.
/// Throws SceneError when the sensor is not in free space or every beam misses.
Scan simulate_scan(const AnalyticScene& scene, const Pose& pose, const ScannerConfig& cfg,
                   std::uint64_t scan_index = 0);

}  // namespace curvndf
