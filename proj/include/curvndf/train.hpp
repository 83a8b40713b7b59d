#pragma once

#include "curvndf/field_net.hpp"
#include "curvndf/geom.hpp"
#include "curvndf/raysample.hpp"
#include "curvndf/supervise.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace curvndf {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regulariser coefficients of the training loss.
struct LossWeights {
  double endpoint = 1e-1;    // lambda_1, |D(e)| at ray endpoints
  double eikonal = 1e-1;     // lambda_2, ||grad D| - 1| (averaged, hence larger than a summed weight)
  double smoothness = 1e-3;  // lambda_3, neighbour normal alignment

  void validate() const;
};

struct LossOptions {
  int neighbors = 4;
  /// Use |n_l . n_j| instead of 1 - n_l . n_j for the smoothness term.
  bool smoothness_literal = false;
};

struct OptimConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-2;
  int epochs = 10;
  int rays_per_batch = 512;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainConfig {
  SupervisionMode mode = SupervisionMode::CurvatureConstrained;
  TargetConfig targets;
  LossWeights weights;
  LossOptions loss;
  OptimConfig optim;
  int samples_per_ray = 40;
  bool drop_behind_origin = false;
  /// Steps trained on closest-normal targets before switching to curvature.
  int warmup_steps = 0;
  int threads = 1;

  void validate() const;
};

/// Unweighted loss terms; total = data + sum_i lambda_i * term_i.
struct LossBreakdown {
  double data = 0.0;
  double endpoint = 0.0;
  double eikonal = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

/// |d_pred - d_hat|.
double residual(double d_pred, double d_hat);

struct TrainingBatch {
  std::vector<Ray> rays;
  std::vector<RaySample> samples;  // ray_index refers into rays

  Eigen::MatrixXd sample_points() const;
  Eigen::MatrixXd endpoint_points() const;
};

TrainingBatch make_batch(std::span<const Ray> rays, std::span<const std::size_t> indices,
                         int samples_per_ray, bool drop_behind_origin);

/// Field evaluations reused between target computation and the loss.
struct BatchJets {
  JetBatch samples;             // order >= 1
  Eigen::VectorXd endpoints;    // D(e_i)
};

BatchJets evaluate_batch(const FieldNet& net, const TrainingBatch& batch, int order,
                         int threads = 1);

/// Per-sample targets for `mode`, weighted from the predicted |D|.
std::vector<DistanceEstimate> compute_targets(const FieldNet& net, const TrainingBatch& batch,
                                              SupervisionMode mode, const TargetConfig& cfg,
                                              const BatchJets& jets);

struct LossResult {
  LossBreakdown breakdown;
  std::vector<double> gradient;  // d total / d parameters, targets held constant
};

/// Loss and exact parameter gradient. Throws TrainingError on an empty batch
/// or a non-finite loss. `jets` may carry precomputed evaluations of `net`.
LossResult batch_loss(const FieldNet& net, const TrainingBatch& batch,
                      std::span<const DistanceEstimate> targets, const LossWeights& weights,
                      const LossOptions& options, const BatchJets* jets = nullptr,
                      int threads = 1);

/// Adam with decoupled weight decay:
///   theta <- theta - lr * wd * theta - lr * m_hat / (sqrt(v_hat) + eps).
class AdamW {
 public:
  AdamW(std::size_t parameter_count, const OptimConfig& cfg);

  void step(std::span<double> parameters, std::span<const double> gradient);
  std::size_t step_count() const { return step_; }

 private:
  OptimConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t step_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  std::size_t batches = 0;
  LossBreakdown mean;  // averaged over the epoch's batches
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  FieldNet net;
  std::vector<EpochRecord> history;
};

/// Rays must already be in canonical coordinates.
TrainResult train(FieldNet net, std::span<const Ray> rays, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Deterministic Fisher-Yates shuffle driven by a 64-bit Mersenne twister.
void shuffle_indices(std::vector<std::size_t>& indices, std::mt19937_64& rng);

}  // namespace curvndf
