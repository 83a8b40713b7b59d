#include "curvndf/mcl.hpp"

#include "curvndf/parallel.hpp"
#include "curvndf/random.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace curvndf {

Pose2 Pose2::compose(const Pose2& other) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {x + c * other.x - s * other.y, y + s * other.x + c * other.y,
          wrap_angle(theta + other.theta)};
}

Pose2 Pose2::between(const Pose2& to) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double dx = to.x - x;
  const double dy = to.y - y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(to.theta - theta)};
}

Vec Pose2::transform(const Vec& local) const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Vec out(2);
  out << x + c * local(0) - s * local(1), y + s * local(0) + c * local(1);
  return out;
}

void MclConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("mcl ") + name + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("mcl ") + name + " must be non-negative");
  };
  if (particles < 1) throw std::invalid_argument("mcl particles must be at least 1");
  if (runs < 1) throw std::invalid_argument("mcl runs must be at least 1");
  if (beams < 0) throw std::invalid_argument("mcl beams must be non-negative");
  if (threads < 1) throw std::invalid_argument("mcl threads must be at least 1");
  positive(convergence_std, "convergence_std");
  positive(gate_translation, "gate_translation");
  positive(gate_rotation, "gate_rotation");
  positive(sigma_z, "sigma_z");
  non_negative(odom_trans_base, "odom_trans_base");
  non_negative(odom_trans_frac, "odom_trans_frac");
  non_negative(odom_rot_base, "odom_rot_base");
  non_negative(odom_rot_frac, "odom_rot_frac");
}

// ---------------------------------------------------------------------------

PoseEstimate estimate(const std::vector<Particle>& particles, double convergence_std) {
  if (particles.empty()) throw std::invalid_argument("cannot estimate from an empty particle set");
  double wsum = 0.0;
  for (const auto& p : particles) wsum += p.weight;
  const bool uniform_weights = !(wsum > 0.0);
  const double n = static_cast<double>(particles.size());
  auto w = [&](const Particle& p) { return uniform_weights ? 1.0 / n : p.weight / wsum; };

  double mx = 0.0, my = 0.0, sx = 0.0, sy = 0.0;
  for (const auto& p : particles) {
    mx += w(p) * p.pose.x;
    my += w(p) * p.pose.y;
    sx += w(p) * std::sin(p.pose.theta);
    sy += w(p) * std::cos(p.pose.theta);
  }
  double var = 0.0;
  for (const auto& p : particles) {
    var += w(p) * ((p.pose.x - mx) * (p.pose.x - mx) + (p.pose.y - my) * (p.pose.y - my));
  }
  PoseEstimate e;
  e.pose = {mx, my, std::atan2(sx, sy)};
  e.std = std::sqrt(std::max(0.0, var));
  e.converged = e.std < convergence_std;
  return e;
}

std::vector<Particle> low_variance_resample(const std::vector<Particle>& particles,
                                            std::mt19937_64& rng) {
  const std::size_t n = particles.size();
  if (n == 0) return {};
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  if (!(total > 0.0)) throw std::invalid_argument("resampling needs a positive total weight");
  const double step = total / static_cast<double>(n);
  const double r = uniform(rng, 0.0, step);
  std::vector<Particle> out;
  out.reserve(n);
  double c = particles[0].weight;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = r + step * static_cast<double>(k);
    while (u > c && i + 1 < n) c += particles[++i].weight;
    out.push_back({particles[i].pose, 1.0 / static_cast<double>(n)});
  }
  return out;
}

Eigen::VectorXd log_likelihoods(const std::vector<Pose2>& poses, const std::vector<Vec>& scan,
                                const DistanceField& field, double sigma_z) {
  if (field.dim() != 2) throw std::invalid_argument("localisation needs a 2D field");
  const auto k = static_cast<Eigen::Index>(scan.size());
  Eigen::MatrixXd pts(2, static_cast<Eigen::Index>(poses.size()) * k);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double c = std::cos(poses[i].theta);
    const double s = std::sin(poses[i].theta);
    for (Eigen::Index b = 0; b < k; ++b) {
      const Vec& z = scan[static_cast<std::size_t>(b)];
      const Eigen::Index col = static_cast<Eigen::Index>(i) * k + b;
      pts(0, col) = poses[i].x + c * z(0) - s * z(1);
      pts(1, col) = poses[i].y + s * z(0) + c * z(1);
    }
  }
  const Eigen::VectorXd d = field.values(pts);
  Eigen::VectorXd ll(static_cast<Eigen::Index>(poses.size()));
  const double inv = 1.0 / (2.0 * sigma_z * sigma_z);
  for (Eigen::Index i = 0; i < ll.size(); ++i) {
    ll(i) = -d.segment(i * k, k).squaredNorm() * inv;
  }
  return ll;
}

// ---------------------------------------------------------------------------

ParticleFilter::ParticleFilter(MclConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
  cfg_.validate();
}

void ParticleFilter::init_uniform(const Aabb& box) {
  box.validate();
  particles_.clear();
  particles_.reserve(static_cast<std::size_t>(cfg_.particles));
  const double w = 1.0 / cfg_.particles;
  for (int i = 0; i < cfg_.particles; ++i) {
    Particle p;
    p.pose.x = uniform(rng_, box.min(0), box.max(0));
    p.pose.y = uniform(rng_, box.min(1), box.max(1));
    p.pose.theta = uniform(rng_, -std::numbers::pi, std::numbers::pi);
    p.weight = w;
    particles_.push_back(p);
  }
  acc_translation_ = 0.0;
  acc_rotation_ = 0.0;
  updated_once_ = false;
}

void ParticleFilter::set_particles(std::vector<Particle> particles) {
  if (particles.empty()) throw std::invalid_argument("particle set must not be empty");
  particles_ = std::move(particles);
}

void ParticleFilter::motion(const Pose2& odometry) {
  const double trans = std::hypot(odometry.x, odometry.y);
  const double rot = std::abs(odometry.theta);
  const double st = cfg_.odom_trans_base + cfg_.odom_trans_frac * trans;
  const double sr = cfg_.odom_rot_base + cfg_.odom_rot_frac * rot;
  // Sequential draws in particle order keep the run reproducible.
  for (auto& p : particles_) {
    Pose2 noisy = odometry;
    noisy.x += st * gaussian(rng_);
    noisy.y += st * gaussian(rng_);
    noisy.theta += sr * gaussian(rng_);
    p.pose = p.pose.compose(noisy);
  }
  acc_translation_ += trans;
  acc_rotation_ += rot;
}

void ParticleFilter::update(const std::vector<Vec>& scan, const DistanceField& field) {
  if (particles_.empty()) throw std::logic_error("particle filter is not initialised");
  std::vector<Vec> beams;
  if (cfg_.beams > 0 && static_cast<std::size_t>(cfg_.beams) < scan.size()) {
    for (int b = 0; b < cfg_.beams; ++b) {
      beams.push_back(scan[static_cast<std::size_t>(b) * scan.size() / static_cast<std::size_t>(cfg_.beams)]);
    }
  } else {
    beams = scan;
  }

  const std::size_t n = particles_.size();
  Eigen::VectorXd ll(static_cast<Eigen::Index>(n));
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, cfg_.threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    std::vector<Pose2> poses;
    poses.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) poses.push_back(particles_[i].pose);
    ll.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        log_likelihoods(poses, beams, field, cfg_.sigma_z);
  });

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (particles_[i].weight > 0.0 && std::isfinite(ll(static_cast<Eigen::Index>(i)))) {
      best = std::max(best, ll(static_cast<Eigen::Index>(i)));
    }
  }
  if (!std::isfinite(best)) {
    ++degenerate_updates_;
    std::cerr << "warning: every particle has zero likelihood; resetting to uniform weights\n";
    for (auto& p : particles_) p.weight = 1.0 / static_cast<double>(n);
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l = ll(static_cast<Eigen::Index>(i));
      particles_[i].weight = std::isfinite(l) ? particles_[i].weight * std::exp(l - best) : 0.0;
      total += particles_[i].weight;
    }
    for (auto& p : particles_) p.weight /= total;
  }
  resample();
  acc_translation_ = 0.0;
  acc_rotation_ = 0.0;
  updated_once_ = true;
}

void ParticleFilter::resample() { particles_ = low_variance_resample(particles_, rng_); }

bool ParticleFilter::step(const Pose2& odometry, const std::vector<Vec>& scan,
                          const DistanceField& field) {
  motion(odometry);
  if (updated_once_ && acc_translation_ < cfg_.gate_translation &&
      acc_rotation_ < cfg_.gate_rotation) {
    return false;
  }
  update(scan, field);
  return true;
}

PoseEstimate ParticleFilter::estimate() const {
  return curvndf::estimate(particles_, cfg_.convergence_std);
}

// ---------------------------------------------------------------------------

LocalizationRun run_localization(const DistanceField& field, const Aabb& map_box,
                                 const std::vector<std::vector<Vec>>& scans,
                                 const std::vector<Pose2>& odometry, const MclConfig& cfg,
                                 std::uint64_t run_seed) {
  if (scans.size() != odometry.size()) throw std::invalid_argument("scan and odometry counts differ");
  if (scans.empty()) throw std::invalid_argument("localisation needs at least one scan");
  ParticleFilter pf(cfg, run_seed);
  pf.init_uniform(map_box);
  LocalizationRun run;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const Pose2 delta = i == 0 ? Pose2{} : odometry[i - 1].between(odometry[i]);
    pf.step(delta, scans[i], field);
    PoseEstimate e = pf.estimate();
    if (e.converged && !run.converged_at) run.converged_at = i;
    run.estimates.push_back(e);
  }
  return run;
}

std::optional<MclMetrics> run_metrics(const std::vector<Pose2>& ground_truth,
                                      const std::vector<LocalizationRun>& runs) {
  MclMetrics m;
  m.runs = static_cast<int>(runs.size());
  for (const auto& run : runs) {
    if (run.estimates.size() != ground_truth.size()) {
      throw std::invalid_argument("estimates and ground truth are not aligned");
    }
    if (!run.converged_at) continue;
    double sq = 0.0, abs_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = *run.converged_at; i < ground_truth.size(); ++i) {
      const double e = std::hypot(run.estimates[i].pose.x - ground_truth[i].x,
                                  run.estimates[i].pose.y - ground_truth[i].y);
      sq += e * e;
      abs_sum += e;
      ++count;
    }
    m.rmse += std::sqrt(sq / static_cast<double>(count));
    m.mae += abs_sum / static_cast<double>(count);
    ++m.converged_runs;
  }
  if (m.converged_runs == 0) return std::nullopt;
  m.rmse /= m.converged_runs;
  m.mae /= m.converged_runs;
  return m;
}

}  // namespace curvndf
