#include "curvndf/commands.hpp"

#include "curvndf/random.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace curvndf {
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double spec_number(const std::string& spec, const std::string& tok) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ConfigError("trajectory '" + spec + "': bad number '" + tok + "'");
  }
  if (used != tok.size() || !std::isfinite(v)) throw ConfigError("trajectory '" + spec + "': bad number '" + tok + "'");
  return v;
}

int spec_count(const std::string& spec, const std::string& tok) {
  const double v = spec_number(spec, tok);
  if (v < 1 || v != std::floor(v)) throw ConfigError("trajectory '" + spec + "': pose count must be a positive integer");
  return static_cast<int>(v);
}

Pose planar_pose(const TrajectoryPoint& p, int dim) {
  if (dim == 2) return Pose::planar(p.x, p.y, p.theta);
  return Pose::yaw3(make_point({p.x, p.y, 0.0}), p.theta);
}

/// Sensor looking from `position` towards `target`, +x forward.
Pose look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
  const Eigen::Vector3d xa = (target - position).normalized();
  const Eigen::Vector3d up = std::abs(xa.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ya = up.cross(xa).normalized();
  const Eigen::Vector3d za = xa.cross(ya);
  Mat r(3, 3);
  r.col(0) = xa;
  r.col(1) = ya;
  r.col(2) = za;
  return Pose(project_to_rotation(r), Vec(position));
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(10);
  return os;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

Trajectory make_trajectory(const std::string& spec, int dim) {
  check_dim(dim);
  Trajectory traj;
  const auto parts = split(spec, ':');
  if (!parts.empty() && parts[0] == "orbit") {
    if (parts.size() != 3 && parts.size() != 5) throw ConfigError("orbit spec is orbit:N:R[:CX:CY]");
    const int n = spec_count(spec, parts[1]);
    const double r = spec_number(spec, parts[2]);
    const double cx = parts.size() == 5 ? spec_number(spec, parts[3]) : 0.0;
    const double cy = parts.size() == 5 ? spec_number(spec, parts[4]) : 0.0;
    if (!(r > 0.0)) throw ConfigError("orbit radius must be positive");
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n;
      traj.planar.push_back({static_cast<double>(i), cx + r * std::cos(a), cy + r * std::sin(a),
                             wrap_angle(a + 0.5 * std::numbers::pi)});
    }
  } else if (!parts.empty() && parts[0] == "sphere") {
    if (parts.size() != 3) throw ConfigError("sphere spec is sphere:N:R");
    if (dim != 3) throw ConfigError("sphere trajectories need a 3D scene");
    const int n = spec_count(spec, parts[1]);
    const double r = spec_number(spec, parts[2]);
    if (!(r > 0.0)) throw ConfigError("sphere radius must be positive");
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < n; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / n;
      const double rho = std::sqrt(1.0 - z * z);
      const double phi = golden * k;
      const Eigen::Vector3d pos = r * Eigen::Vector3d(rho * std::cos(phi), rho * std::sin(phi), z);
      traj.poses.push_back(look_at(pos, Eigen::Vector3d::Zero()));
    }
    return traj;
  } else {
    traj.planar = read_trajectory(spec);
    if (traj.planar.empty()) throw ConfigError("trajectory file " + spec + " has no poses");
  }
  for (const auto& p : traj.planar) traj.poses.push_back(planar_pose(p, dim));
  return traj;
}

std::vector<Scan> simulate_scans(const AnalyticScene& scene, const Trajectory& traj,
                                 const ScannerConfig& scanner, std::uint64_t seed) {
  ScannerConfig sc = scanner;
  sc.seed = seed;
  std::vector<Scan> scans;
  scans.reserve(traj.poses.size());
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    scans.push_back(simulate_scan(scene, traj.poses[i], sc, i));
  }
  return scans;
}

SynthSummary cmd_synth(const fs::path& scene_file, const std::string& trajectory_spec,
                       const fs::path& out_dir, const RunConfig& cfg) {
  const AnalyticScene scene = AnalyticScene::load(scene_file);
  const Trajectory traj = make_trajectory(trajectory_spec, scene.dim());
  const std::vector<Scan> scans = simulate_scans(scene, traj, cfg.scanner, cfg.seed);
  save_scans(out_dir, scans);
  if (!traj.planar.empty()) write_trajectory(out_dir / "trajectory.txt", traj.planar);
  std::ostringstream os;
  scene.write(os);
  write_text(out_dir / "scene.txt", os.str());
  SynthSummary s;
  s.scans = scans.size();
  for (const auto& sc : scans) s.points += sc.points.size();
  return s;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainedModel train_on_scans(const std::vector<Scan>& scans, const RunConfig& cfg, int threads,
                            const EpochCallback& on_epoch) {
  if (scans.empty()) throw ConfigError("no scans to train on");
  const int dim = scans.front().pose.dim();
  std::vector<Ray> rays;
  for (const auto& s : scans) {
    if (s.pose.dim() != dim) throw GeometryError("scans mix dimensions");
    const auto r = to_world(s);
    rays.insert(rays.end(), r.begin(), r.end());
  }
  const Aabb box = scene_box(cfg, scans);
  const NormalizedRays nr = normalize_scene(rays, box);

  TrainConfig tc = cfg.train;
  tc.optim.seed = cfg.seed;
  tc.threads = threads;
  FieldNet net = FieldNet::init(cfg.net_config(dim), cfg.seed);
  TrainResult res = train(std::move(net), nr.rays, tc, on_epoch);
  return TrainedModel{std::move(res.net), nr.transform, std::move(res.history), nr.rays.size(),
                      nr.dropped};
}

void write_loss_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  std::ostringstream os = csv_stream();
  os << "epoch,batches,data,endpoint,eikonal,smoothness,total\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.batches << ',' << r.mean.data << ',' << r.mean.endpoint << ','
       << r.mean.eikonal << ',' << r.mean.smoothness << ',' << r.mean.total << '\n';
  }
  out << os.str();
}

TrainedModel cmd_train(const RunConfig& cfg, const fs::path& scans_dir, int dim,
                       const fs::path& out_model, const fs::path& loss_csv, int threads,
                       std::ostream* progress) {
  const std::vector<Scan> scans = load_scans(scans_dir, dim);
  TrainedModel model = train_on_scans(scans, cfg, threads, [&](const EpochRecord& r) {
    if (progress == nullptr) return;
    *progress << "epoch " << r.epoch << " total " << r.mean.total << " data " << r.mean.data << '\n';
  });
  save_model(out_model, model.net, model.transform);
  std::ostringstream os;
  write_loss_csv(model.history, os);
  write_text(loss_csv, os.str());
  return model;
}

// ---------------------------------------------------------------------------
// Meshing and evaluation
// ---------------------------------------------------------------------------

Aabb model_box(const SceneTransform& transform, int dim) {
  const double half = 1.0 / transform.scale;
  Aabb box = Aabb::cube(transform.center, half);
  if (box.dim() != dim) throw GeometryError("model transform dimension mismatch");
  return box;
}

MeshSummary cmd_mesh(const fs::path& model, int resolution, const fs::path& out_ply, int threads) {
  if (resolution < 1) throw ConfigError("mesh resolution must be at least 1");
  ModelFile mf = load_model(model);
  const int dim = mf.net.dim();
  const Aabb box = model_box(mf.transform, dim);
  const NetField field(std::move(mf.net), mf.transform, threads);
  MeshSummary s;
  if (dim == 3) {
    const TriangleMesh mesh = marching_cubes(field.batch(), box, resolution, threads);
    export_mesh_ply(mesh, out_ply);
    s.vertices = mesh.vertices.size();
    s.elements = mesh.triangles.size();
  } else {
    const Polylines lines = marching_squares(field.batch(), box, resolution, threads);
    export_polylines_ply(lines, out_ply);
    s.vertices = lines.vertices.size();
    s.elements = lines.segment_count();
  }
  return s;
}

SdfMetrics cmd_eval_sdf(const DistanceField& field, const AnalyticScene& truth, const Aabb& box,
                        double band, std::size_t samples, std::uint64_t seed) {
  BandSamplingConfig bc;
  bc.band = band;
  bc.samples = samples;
  bc.seed = seed;
  return evaluate_band(field, truth, box, bc);
}

void write_sdf_csv(const SdfMetrics& m, std::ostream& out) {
  std::ostringstream os = csv_stream();
  os << "count,mae,rmse,eikonal\n" << m.count << ',' << m.mae << ',' << m.rmse << ',' << m.eikonal << '\n';
  out << os.str();
}

// ---------------------------------------------------------------------------
// Localisation
// ---------------------------------------------------------------------------

LocalizationReport localize(const DistanceField& field, const Aabb& box, double outside_value,
                            const std::vector<Scan>& scans,
                            const std::vector<TrajectoryPoint>& ground_truth, const RunConfig& cfg,
                            int threads) {
  if (field.dim() != 2) throw ConfigError("localisation needs a 2D field");
  if (scans.size() != ground_truth.size()) {
    throw ConfigError("dataset has " + std::to_string(scans.size()) + " scans but " +
                      std::to_string(ground_truth.size()) + " trajectory poses");
  }
  const GridField cached = cache_field(field, box, cfg.mcl_grid_samples, outside_value, threads);
  std::vector<std::vector<Vec>> points;
  std::vector<Pose2> odometry;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    points.push_back(scans[i].points);
    odometry.push_back({ground_truth[i].x, ground_truth[i].y, ground_truth[i].theta});
  }
  MclConfig mc = cfg.mcl;
  mc.threads = threads;
  LocalizationReport report;
  for (int r = 0; r < mc.runs; ++r) {
    report.runs.push_back(run_localization(cached, box, points, odometry, mc,
                                           mix_seed(cfg.seed, static_cast<std::uint64_t>(r))));
  }
  report.metrics = run_metrics(odometry, report.runs);
  return report;
}

LocalizationReport cmd_localize(const DistanceField& field, const Aabb& box, double outside_value,
                                const fs::path& dataset, const RunConfig& cfg, int threads) {
  const std::vector<Scan> scans = load_scans(dataset, 2);
  const std::vector<TrajectoryPoint> gt = read_trajectory(dataset / "trajectory.txt");
  return localize(field, box, outside_value, scans, gt, cfg, threads);
}

void write_localization_csv(const LocalizationReport& report, std::ostream& out) {
  std::ostringstream os = csv_stream();
  os << "run,converged_at,final_x,final_y,final_theta,final_std\n";
  for (std::size_t r = 0; r < report.runs.size(); ++r) {
    const auto& run = report.runs[r];
    const auto& last = run.estimates.back();
    os << r << ',';
    if (run.converged_at) {
      os << *run.converged_at;
    } else {
      os << '-';
    }
    os << ',' << last.pose.x << ',' << last.pose.y << ',' << last.pose.theta << ',' << last.std << '\n';
  }
  os << "summary,rmse,mae,converged_runs\n";
  if (report.metrics) {
    os << "all," << report.metrics->rmse << ',' << report.metrics->mae << ','
       << report.metrics->converged_runs << '\n';
  } else {
    os << "all,-,-,0\n";
  }
  out << os.str();
}

// ---------------------------------------------------------------------------
// Three-way comparison
// ---------------------------------------------------------------------------

std::vector<CompareRow> cmd_compare(const AnalyticScene& scene, const std::string& trajectory_spec,
                                    const RunConfig& cfg, int threads, std::ostream* progress) {
  const Trajectory traj = make_trajectory(trajectory_spec, scene.dim());
  const std::vector<Scan> scans = simulate_scans(scene, traj, cfg.scanner, cfg.seed);
  const Aabb box = scene_box(cfg, scans);

  std::vector<CompareRow> rows;
  for (SupervisionMode mode : {SupervisionMode::RayDistance, SupervisionMode::ClosestNormal,
                               SupervisionMode::CurvatureConstrained}) {
    RunConfig mc = cfg;
    mc.train.mode = mode;
    TrainedModel model = train_on_scans(scans, mc, threads, [&](const EpochRecord& r) {
      if (progress == nullptr) return;
      *progress << to_string(mode) << " epoch " << r.epoch << " total " << r.mean.total << '\n';
    });
    const double tau_world = model.transform.distance_to_world(cfg.train.targets.truncation);
    const NetField field(std::move(model.net), model.transform, threads);

    CompareRow row;
    row.mode = mode;
    row.sdf = cmd_eval_sdf(field, scene, box, cfg.eval_band > 0.0 ? cfg.eval_band : tau_world,
                           cfg.eval_samples, cfg.seed);
    if (scene.dim() == 2 && !traj.planar.empty()) {
      row.mcl = localize(field, box, tau_world, scans, traj.planar, cfg, threads).metrics;
    }
    if (progress != nullptr) {
      *progress << to_string(mode) << " sdf mae " << row.sdf.mae;
      if (row.mcl) *progress << " mcl rmse " << row.mcl->rmse << " mae " << row.mcl->mae;
      *progress << '\n';
    }
    rows.push_back(row);
  }
  return rows;
}

void write_compare_csv(const std::vector<CompareRow>& rows, std::ostream& out) {
  std::ostringstream os = csv_stream();
  os << "mode,sdf_mae,sdf_rmse,mcl_rmse,mcl_mae\n";
  for (const auto& r : rows) {
    os << to_string(r.mode) << ',' << r.sdf.mae << ',' << r.sdf.rmse << ',';
    if (r.mcl) {
      os << r.mcl->rmse << ',' << r.mcl->mae;
    } else {
      os << "-,-";
    }
    os << '\n';
  }
  out << os.str();
}

}  // namespace curvndf
