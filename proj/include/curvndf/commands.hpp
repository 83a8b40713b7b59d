#pragma once

#include "curvndf/config.hpp"
#include "curvndf/evaluate.hpp"
#include "curvndf/io_store.hpp"
#include "curvndf/mcl.hpp"
#include "curvndf/scene_oracle.hpp"
#include "curvndf/train.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace curvndf {

// End-to-end operations behind the command-line tool. Each one is a pure
// function of its inputs, the config and the seed it carries, so reruns with
// one thread reproduce every output byte for byte.

struct Trajectory {
  std::vector<Pose> poses;
  std::vector<TrajectoryPoint> planar;  // empty unless every pose is planar
};

/// Trajectory specs:
///   orbit:N:R[:CX:CY]  N poses counter-clockwise on a circle, heading along it
///   sphere:N:R         N Fibonacci viewpoints on a sphere looking at the origin (3D)
///   PATH               a `t x y theta` file
/// Planar specs in a 3D scene place the sensor at z = 0.
Trajectory make_trajectory(const std::string& spec, int dim);

/// Simulated scans of an analytic scene along a trajectory.
std::vector<Scan> simulate_scans(const AnalyticScene& scene, const Trajectory& traj,
                                 const ScannerConfig& scanner, std::uint64_t seed);

struct SynthSummary {
  std::size_t scans = 0;
  std::size_t points = 0;
};

/// Writes poses.txt, scan_NNNNNN.bin, trajectory.txt (planar only) and a
/// copy of the scene as scene.txt into `out_dir`.
SynthSummary cmd_synth(const std::filesystem::path& scene_file, const std::string& trajectory_spec,
                       const std::filesystem::path& out_dir, const RunConfig& cfg);

struct TrainedModel {
  FieldNet net;
  SceneTransform transform;
  std::vector<EpochRecord> history;
  std::size_t rays = 0;
  std::size_t dropped = 0;
};

/// Normalises the scans into the config's scene box and trains one model.
TrainedModel train_on_scans(const std::vector<Scan>& scans, const RunConfig& cfg, int threads,
                            const EpochCallback& on_epoch = {});

void write_loss_csv(const std::vector<EpochRecord>& history, std::ostream& out);

/// Trains on a dataset directory, writes the checkpoint and a loss CSV.
TrainedModel cmd_train(const RunConfig& cfg, const std::filesystem::path& scans_dir, int dim,
                       const std::filesystem::path& out_model,
                       const std::filesystem::path& loss_csv, int threads,
                       std::ostream* progress = nullptr);

/// World-space box covered by a model (its canonical cube).
Aabb model_box(const SceneTransform& transform, int dim);

struct MeshSummary {
  std::size_t vertices = 0;
  std::size_t elements = 0;  // triangles (3D) or segments (2D)
};

/// Marching cubes (3D) or squares (2D) over the model's box; PLY output.
MeshSummary cmd_mesh(const std::filesystem::path& model, int resolution,
                     const std::filesystem::path& out_ply, int threads);

/// Band metrics of a field against an analytic scene. A band of 0 uses the
/// config truncation in world units (tau / scale).
SdfMetrics cmd_eval_sdf(const DistanceField& field, const AnalyticScene& truth, const Aabb& box,
                        double band, std::size_t samples, std::uint64_t seed);
void write_sdf_csv(const SdfMetrics& m, std::ostream& out);

struct LocalizationReport {
  std::vector<LocalizationRun> runs;
  std::optional<MclMetrics> metrics;
};

/// Caches `field` over `box` and runs cfg.mcl.runs seeded global
/// localisations over the scans, with ground-truth motion as odometry.
LocalizationReport localize(const DistanceField& field, const Aabb& box, double outside_value,
                            const std::vector<Scan>& scans,
                            const std::vector<TrajectoryPoint>& ground_truth, const RunConfig& cfg,
                            int threads);

/// Loads a 2D dataset (scans + trajectory.txt) and localises in it.
LocalizationReport cmd_localize(const DistanceField& field, const Aabb& box, double outside_value,
                                const std::filesystem::path& dataset, const RunConfig& cfg,
                                int threads);
void write_localization_csv(const LocalizationReport& report, std::ostream& out);

struct CompareRow {
  SupervisionMode mode = SupervisionMode::RayDistance;
  SdfMetrics sdf;
  std::optional<MclMetrics> mcl;  // absent for 3D scenes or when no run converged
};

/// Trains one model per supervision mode on identical rays, initialisation
/// and hyperparameters, then reports band SDF errors and (2D) MCL errors.
std::vector<CompareRow> cmd_compare(const AnalyticScene& scene, const std::string& trajectory_spec,
                                    const RunConfig& cfg, int threads,
                                    std::ostream* progress = nullptr);
void write_compare_csv(const std::vector<CompareRow>& rows, std::ostream& out);

}  // namespace curvndf
