#include "curvndf/train.hpp"

#include "curvndf/kdtree.hpp"
#include "curvndf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace curvndf {
namespace {

// Points per parallel work item. Fixed so that reductions do not depend on
// the thread count.
constexpr Eigen::Index kGroup = 1024;

double sign(double v) { return (v > 0.0) - (v < 0.0); }

Eigen::Index group_count(Eigen::Index n) { return (n + kGroup - 1) / kGroup; }

JetBatch parallel_jets(const FieldNet& net, const Eigen::MatrixXd& points, int order,
                       int threads) {
  const Eigen::Index n = points.cols();
  const int m = net.dim();
  JetBatch out;
  out.order = order;
  out.value.resize(n);
  if (order >= 1) out.gradient.resize(m, n);
  if (order >= 2) out.hessian_packed.resize(m * (m + 1) / 2, n);
  parallel_for(static_cast<std::size_t>(group_count(n)), threads, [&](std::size_t g) {
    const Eigen::Index start = static_cast<Eigen::Index>(g) * kGroup;
    const Eigen::Index len = std::min(kGroup, n - start);
    JetBatch part = net.jet_batch(points.middleCols(start, len), order);
    out.value.segment(start, len) = part.value;
    if (order >= 1) out.gradient.middleCols(start, len) = part.gradient;
    if (order >= 2) out.hessian_packed.middleCols(start, len) = part.hessian_packed;
  });
  return out;
}

void accumulate_parallel(const FieldNet& net, const Eigen::MatrixXd& points,
                         const Eigen::VectorXd& value_cot, const Eigen::MatrixXd& grad_cot,
                         std::vector<double>& gradient, int threads) {
  const Eigen::Index n = points.cols();
  const auto groups = static_cast<std::size_t>(group_count(n));
  std::vector<std::vector<double>> partial(groups);
  const bool with_grad = grad_cot.size() > 0;
  parallel_for(groups, threads, [&](std::size_t g) {
    const Eigen::Index start = static_cast<Eigen::Index>(g) * kGroup;
    const Eigen::Index len = std::min(kGroup, n - start);
    partial[g].assign(net.parameter_count(), 0.0);
    const Eigen::MatrixXd empty;
    net.accumulate_parameter_gradient(
        points.middleCols(start, len), value_cot.segment(start, len),
        with_grad ? Eigen::MatrixXd(grad_cot.middleCols(start, len)) : empty, partial[g]);
  });
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] += p[i];
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(endpoint >= 0.0) || !(eikonal >= 0.0) || !(smoothness >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0) || !(weight_decay >= 0.0)) {
    throw std::invalid_argument("epsilon must be positive and weight decay non-negative");
  }
  if (epochs < 0 || rays_per_batch <= 0) {
    throw std::invalid_argument("epochs must be >= 0 and rays per batch > 0");
  }
}

void TrainConfig::validate() const {
  weights.validate();
  optim.validate();
  if (!(targets.truncation > 0.0) || !(targets.min_radius > 0.0) ||
      !(targets.max_radius >= targets.min_radius) || !(targets.gamma >= 0.0)) {
    throw std::invalid_argument("invalid target configuration");
  }
  if (samples_per_ray < 2) throw std::invalid_argument("need at least 2 samples per ray");
  if (loss.neighbors < 0) throw std::invalid_argument("neighbour count must be >= 0");
  if (warmup_steps < 0 || threads < 1) {
    throw std::invalid_argument("warmup steps must be >= 0 and threads >= 1");
  }
}

double residual(double d_pred, double d_hat) { return std::abs(d_pred - d_hat); }

Eigen::MatrixXd TrainingBatch::sample_points() const {
  const int m = rays.empty() ? 0 : static_cast<int>(rays.front().origin.size());
  Eigen::MatrixXd pts(m, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = samples[i].x;
  return pts;
}

Eigen::MatrixXd TrainingBatch::endpoint_points() const {
  const int m = rays.empty() ? 0 : static_cast<int>(rays.front().origin.size());
  Eigen::MatrixXd pts(m, static_cast<Eigen::Index>(rays.size()));
  for (std::size_t i = 0; i < rays.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = rays[i].endpoint;
  return pts;
}

TrainingBatch make_batch(std::span<const Ray> rays, std::span<const std::size_t> indices,
                         int samples_per_ray, bool drop_behind_origin) {
  TrainingBatch batch;
  batch.rays.reserve(indices.size());
  for (std::size_t idx : indices) {
    const std::size_t local = batch.rays.size();
    batch.rays.push_back(rays[idx]);
    for (RaySample& s : sample_ray(rays[idx], samples_per_ray, local, drop_behind_origin)) {
      batch.samples.push_back(std::move(s));
    }
  }
  return batch;
}

BatchJets evaluate_batch(const FieldNet& net, const TrainingBatch& batch, int order,
                         int threads) {
  BatchJets jets;
  jets.samples = parallel_jets(net, batch.sample_points(), std::max(order, 1), threads);
  jets.endpoints = parallel_jets(net, batch.endpoint_points(), 0, threads).value;
  return jets;
}

std::vector<DistanceEstimate> compute_targets(const FieldNet& net, const TrainingBatch& batch,
                                              SupervisionMode mode, const TargetConfig& cfg,
                                              const BatchJets& jets) {
  if (mode == SupervisionMode::CurvatureConstrained && jets.samples.order < 2) {
    throw std::invalid_argument("curvature targets need second-order jets");
  }
  const int m = net.dim();
  std::vector<DistanceEstimate> targets;
  targets.reserve(batch.samples.size());
  std::vector<double> predicted(batch.samples.size());
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const RaySample& s = batch.samples[i];
    const FieldJet jet = jets.samples.jet(static_cast<Eigen::Index>(i));
    targets.push_back(estimate_target(mode, batch.rays[s.ray_index], s, jet, m, cfg));
    predicted[i] = jet.value;
  }
  assign_weights(targets, predicted, cfg.gamma);
  return targets;
}

LossResult batch_loss(const FieldNet& net, const TrainingBatch& batch,
                      std::span<const DistanceEstimate> targets, const LossWeights& weights,
                      const LossOptions& options, const BatchJets* jets, int threads) {
  if (batch.samples.empty() || batch.rays.empty()) throw TrainingError("empty batch");
  if (targets.size() != batch.samples.size()) {
    throw TrainingError("every sample needs a distance estimate");
  }
  BatchJets local;
  if (jets == nullptr) {
    local = evaluate_batch(net, batch, 1, threads);
    jets = &local;
  }
  const int m = net.dim();
  const auto ns = static_cast<Eigen::Index>(batch.samples.size());
  const auto nr = static_cast<Eigen::Index>(batch.rays.size());
  const Eigen::VectorXd& d = jets->samples.value;
  const Eigen::MatrixXd& g = jets->samples.gradient;

  LossBreakdown out;
  Eigen::VectorXd sample_cot = Eigen::VectorXd::Zero(ns);
  Eigen::MatrixXd grad_cot = Eigen::MatrixXd::Zero(m, ns);
  Eigen::VectorXd end_cot(nr);

  // Weighted data term; uniform weights if every weight vanished.
  double weight_sum = 0.0;
  for (const DistanceEstimate& t : targets) weight_sum += t.weight;
  const bool uniform = !(weight_sum > 0.0);
  const double norm = uniform ? static_cast<double>(ns) : weight_sum;
  for (Eigen::Index i = 0; i < ns; ++i) {
    const double w = uniform ? 1.0 : targets[static_cast<std::size_t>(i)].weight;
    const double diff = d(i) - targets[static_cast<std::size_t>(i)].d_hat;
    out.data += w * std::abs(diff);
    sample_cot(i) = w * sign(diff) / norm;
  }
  out.data /= norm;

  for (Eigen::Index r = 0; r < nr; ++r) {
    out.endpoint += std::abs(jets->endpoints(r));
    end_cot(r) = weights.endpoint * sign(jets->endpoints(r)) / static_cast<double>(nr);
  }
  out.endpoint /= static_cast<double>(nr);

  Eigen::VectorXd gnorm(ns);
  for (Eigen::Index i = 0; i < ns; ++i) {
    gnorm(i) = g.col(i).norm();
    const double dev = gnorm(i) - 1.0;
    out.eikonal += std::abs(dev);
    if (gnorm(i) > 0.0) {
      grad_cot.col(i) += weights.eikonal * sign(dev) / static_cast<double>(ns) * g.col(i) / gnorm(i);
    }
  }
  out.eikonal /= static_cast<double>(ns);

  if (options.neighbors > 0 && ns > 1) {
    const Eigen::MatrixXd pts = batch.sample_points();
    const KdTree tree(pts);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < ns; ++i) {
      if (gnorm(i) < kMinGradientNorm) continue;
      for (std::int32_t j : tree.nearest_excluding(static_cast<std::int32_t>(i), options.neighbors)) {
        if (gnorm(j) >= kMinGradientNorm) pairs.emplace_back(i, j);
      }
    }
    if (!pairs.empty()) {
      const double scale = weights.smoothness / static_cast<double>(pairs.size());
      for (const auto& [i, j] : pairs) {
        if (options.smoothness_literal) {
          const double dot = g.col(i).dot(g.col(j));
          out.smoothness += std::abs(dot);
          grad_cot.col(i) += scale * sign(dot) * g.col(j);
          grad_cot.col(j) += scale * sign(dot) * g.col(i);
        } else {
          const Eigen::VectorXd ui = g.col(i) / gnorm(i);
          const Eigen::VectorXd uj = g.col(j) / gnorm(j);
          const double c = ui.dot(uj);
          out.smoothness += 1.0 - c;
          grad_cot.col(i) -= scale * (uj - c * ui) / gnorm(i);
          grad_cot.col(j) -= scale * (ui - c * uj) / gnorm(j);
        }
      }
      out.smoothness /= static_cast<double>(pairs.size());
    }
  }

  out.total = out.data + weights.endpoint * out.endpoint + weights.eikonal * out.eikonal +
              weights.smoothness * out.smoothness;
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "non-finite loss: data=" << out.data << " endpoint=" << out.endpoint
        << " eikonal=" << out.eikonal << " smoothness=" << out.smoothness;
    throw TrainingError(msg.str());
  }

  LossResult result{out, std::vector<double>(net.parameter_count(), 0.0)};
  accumulate_parallel(net, batch.sample_points(), sample_cot, grad_cot, result.gradient, threads);
  accumulate_parallel(net, batch.endpoint_points(), end_cot, Eigen::MatrixXd(), result.gradient,
                      threads);
  return result;
}

AdamW::AdamW(std::size_t parameter_count, const OptimConfig& cfg)
    : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  cfg_.validate();
}

void AdamW::step(std::span<double> parameters, std::span<const double> gradient) {
  if (parameters.size() != m_.size() || gradient.size() != m_.size()) {
    throw std::invalid_argument("AdamW: parameter/gradient size mismatch");
  }
  for (double gi : gradient) {
    if (!std::isfinite(gi)) throw TrainingError("non-finite gradient");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double lr = cfg_.learning_rate;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gradient[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gradient[i] * gradient[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    parameters[i] -= lr * cfg_.weight_decay * parameters[i];
    parameters[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
  }
}

void shuffle_indices(std::vector<std::size_t>& indices, std::mt19937_64& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    // Multiply-shift reduction of 64 random bits onto [0, i).
    const auto j = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(i)) >> 64);
    std::swap(indices[i - 1], indices[j]);
  }
}

TrainResult train(FieldNet net, std::span<const Ray> rays, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result{std::move(net), {}};
  if (cfg.optim.epochs == 0) return result;
  if (rays.empty()) throw TrainingError("no rays to train on");

  AdamW optimizer(result.net.parameter_count(), cfg.optim);
  std::mt19937_64 rng(cfg.optim.seed);
  std::vector<std::size_t> order(rays.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto batch_size = static_cast<std::size_t>(cfg.optim.rays_per_batch);
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    shuffle_indices(order, rng);
    EpochRecord record;
    record.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const TrainingBatch batch =
          make_batch(rays, std::span(order).subspan(start, len), cfg.samples_per_ray,
                     cfg.drop_behind_origin);
      SupervisionMode mode = cfg.mode;
      if (mode == SupervisionMode::CurvatureConstrained &&
          optimizer.step_count() < static_cast<std::size_t>(cfg.warmup_steps)) {
        mode = SupervisionMode::ClosestNormal;
      }
      const int order_needed = mode == SupervisionMode::CurvatureConstrained ? 2 : 1;
      const BatchJets jets = evaluate_batch(result.net, batch, order_needed, cfg.threads);
      const std::vector<DistanceEstimate> targets =
          compute_targets(result.net, batch, mode, cfg.targets, jets);
      LossResult loss =
          batch_loss(result.net, batch, targets, cfg.weights, cfg.loss, &jets, cfg.threads);
      optimizer.step(result.net.parameters(), loss.gradient);

      record.mean.data += loss.breakdown.data;
      record.mean.endpoint += loss.breakdown.endpoint;
      record.mean.eikonal += loss.breakdown.eikonal;
      record.mean.smoothness += loss.breakdown.smoothness;
      record.mean.total += loss.breakdown.total;
      ++record.batches;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(record.batches, 1));
    record.mean.data /= nb;
    record.mean.endpoint /= nb;
    record.mean.eikonal /= nb;
    record.mean.smoothness /= nb;
    record.mean.total /= nb;
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace curvndf
