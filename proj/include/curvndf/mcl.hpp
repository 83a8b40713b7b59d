#pragma once

#include "curvndf/evaluate.hpp"
#include "curvndf/geom.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace curvndf {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  /// Frame composition: `other` expressed in this pose's frame.
  Pose2 compose(const Pose2& other) const;
  /// Relative motion taking this pose to `to`, in this pose's frame.
  Pose2 between(const Pose2& to) const;
  Vec transform(const Vec& local) const;
};

struct Particle {
  Pose2 pose;
  double weight = 0.0;
};

struct MclConfig {
  int particles = 10000;
  double convergence_std = 0.30;   // positional std below which the filter is converged
  double gate_translation = 0.05;  // accumulated odometry translation triggering an update
  double gate_rotation = 0.1;      // accumulated odometry rotation (radians)
  double sigma_z = 0.1;            // observation noise of the field value at an endpoint
  // The base noise terms are wide enough to let a cluster that locked onto a
  // slightly wrong pose after the first update drift back to the truth.
  double odom_trans_base = 0.05;
  double odom_trans_frac = 0.01;
  double odom_rot_base = 0.02;
  double odom_rot_frac = 0.01;
  int runs = 5;
  int beams = 0;  // beams used per update, evenly subsampled; 0 keeps all
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct PoseEstimate {
  Pose2 pose;
  double std = 0.0;  // weighted positional standard deviation
  bool converged = false;
};

class ParticleFilter {
 public:
  ParticleFilter(MclConfig cfg, std::uint64_t seed);

  /// Uniform over the xy extent of `box` with headings in [-pi, pi), equal weights.
  void init_uniform(const Aabb& box);
  void set_particles(std::vector<Particle> particles);

  /// Applies `odometry` (relative motion in the robot frame) with seeded
  /// noise to every particle. Once the accumulated odometry since the last
  /// update reaches either gate, particles are reweighted by the field
  /// likelihood of `scan` (sensor-frame endpoints) and resampled. The first
  /// call always updates. Returns true when an update happened.
  bool step(const Pose2& odometry, const std::vector<Vec>& scan, const DistanceField& field);

  /// Measurement update and low-variance resampling, without motion.
  void update(const std::vector<Vec>& scan, const DistanceField& field);

  PoseEstimate estimate() const;
  const std::vector<Particle>& particles() const { return particles_; }
  std::size_t degenerate_updates() const { return degenerate_updates_; }

 private:
  void motion(const Pose2& odometry);
  void resample();

  MclConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<Particle> particles_;
  double acc_translation_ = 0.0;
  double acc_rotation_ = 0.0;
  bool updated_once_ = false;
  std::size_t degenerate_updates_ = 0;
};

/// Weighted mean position, circular mean heading, positional std.
PoseEstimate estimate(const std::vector<Particle>& particles, double convergence_std);

/// Systematic resampling: same count, equal weights.
std::vector<Particle> low_variance_resample(const std::vector<Particle>& particles,
                                            std::mt19937_64& rng);

/// Sum over beams of -D(T_pose(z))^2 / (2 sigma^2), one value per pose.
Eigen::VectorXd log_likelihoods(const std::vector<Pose2>& poses, const std::vector<Vec>& scan,
                                const DistanceField& field, double sigma_z);

struct LocalizationRun {
  std::vector<PoseEstimate> estimates;  // one per scan
  std::optional<std::size_t> converged_at;
};

/// Global localisation over a scan sequence. Odometry between consecutive
/// scans is the relative motion of `odometry` poses.
LocalizationRun run_localization(const DistanceField& field, const Aabb& map_box,
                                 const std::vector<std::vector<Vec>>& scans,
                                 const std::vector<Pose2>& odometry, const MclConfig& cfg,
                                 std::uint64_t run_seed);

struct MclMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  int converged_runs = 0;
  int runs = 0;
};

/// Position errors after each run's convergence instant, per-run RMSE and
/// MAE averaged across converged runs. Empty when no run converged.
std::optional<MclMetrics> run_metrics(const std::vector<Pose2>& ground_truth,
                                      const std::vector<LocalizationRun>& runs);

}  // namespace curvndf
