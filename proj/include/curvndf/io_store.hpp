#pragma once

#include "curvndf/field_net.hpp"
#include "curvndf/geom.hpp"
#include "curvndf/mesher.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvndf {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scan datasets
//
// A dataset directory holds `poses.txt` (one world-from-sensor pose per line,
// 12 reals, row-major 3x4) and one binary file per scan, paired by sorted
// file name. `scan_NNNNNN.bin` files are little-endian float32 xyz triplets;
// other `*.bin` files are read as KITTI-style float32 xyzi records with the
// intensity dropped.
// ---------------------------------------------------------------------------

enum class ScanFormat { Auto, Xyz, Kitti };

/// Parses one pose line. Rotations within 1e-4 of orthonormal are projected
/// onto SO(3); anything further off is rejected.
Pose parse_pose_line(const std::string& line);
std::string format_pose_line(const Pose& pose);

std::vector<Vec> read_scan_file(const std::filesystem::path& path, ScanFormat format);
void write_scan_file(const std::filesystem::path& path, const std::vector<Vec>& points);

/// Loads every scan in `dir`. dim = 2 projects planar data onto the xy plane
/// (rejects out-of-plane rotations or z != 0 points).
std::vector<Scan> load_scans(const std::filesystem::path& dir, int dim = 3,
                             ScanFormat format = ScanFormat::Auto);
void save_scans(const std::filesystem::path& dir, const std::vector<Scan>& scans);

/// Ground-truth / odometry trajectory, one `t x y theta` line per pose.
struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

std::vector<TrajectoryPoint> read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryPoint>& traj);

// ---------------------------------------------------------------------------
// Model checkpoints (little-endian):
//   magic "CCNDF\0"            6 bytes
//   version                    u16 (= 1)
//   dimension m                u8
//   encoding bands h           u16
//   layer count L              u16, then L+1 layer sizes as u32
//   omega_first, omega_hidden  f64
//   h encoding frequencies     f64
//   scene centre (m), scale    f64
//   parameters                 f64, layer-major, weights (column-major) then bias
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kModelVersion = 1;

struct ModelFile {
  FieldNet net;
  SceneTransform transform;
};

std::size_t model_header_size(const NetConfig& cfg);
void save_model(const std::filesystem::path& path, const FieldNet& net,
                const SceneTransform& transform);
ModelFile load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Meshes and grids
// ---------------------------------------------------------------------------

/// ASCII PLY, float32 vertex coordinates, triangle faces.
void export_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh import_mesh_ply(const std::filesystem::path& path);

/// ASCII PLY with z = 0 vertices and an `edge` element per polyline segment.
void export_polylines_ply(const Polylines& lines, const std::filesystem::path& path);

/// Text header (dimension, box corners, samples per axis) terminated by
/// `end_header`, followed by little-endian float32 values, x-fastest.
void export_grid(const ScalarGrid& grid, const std::filesystem::path& path);
ScalarGrid import_grid(const std::filesystem::path& path);

}  // namespace curvndf
