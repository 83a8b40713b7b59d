#pragma once

#include "curvndf/encode.hpp"
#include "curvndf/geom.hpp"

#include <Eigen/Core>
#include <Eigen/StdVector>

#include <cstdint>
#include <span>
#include <vector>

namespace curvndf {

struct NetConfig {
  int dim = 3;
  EncodingConfig encoding = EncodingConfig::defaults();
  int hidden_width = 128;
  int hidden_layers = 4;
  double omega_first = 3.0;   // frequency factor of the first sine layer
  double omega_hidden = 3.0;  // frequency factor of the remaining sine layers

  void validate() const;
  /// [input, hidden..., 1]
  std::vector<int> layer_sizes() const;
};

/// Value, gradient and Hessian of a scalar field at one point.
struct FieldJet {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// Packed batch of jets. `order` 0 fills only values, 1 adds gradients,
/// 2 adds the upper triangle of the Hessian in (0,0),(0,1),..,(1,1),.. order.
struct JetBatch {
  int order = 0;
  Eigen::VectorXd value;
  Eigen::MatrixXd gradient;        // m x B
  Eigen::MatrixXd hessian_packed;  // m(m+1)/2 x B

  Eigen::Index size() const { return value.size(); }
  Mat hessian(Eigen::Index i) const;
  FieldJet jet(Eigen::Index i) const;
};

struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // column-major out x in
  std::size_t bias_offset = 0;
  double omega = 1.0;
  bool sine = true;
};

/// Sine-activated MLP over positional encodings, D(x) = MLP(encode(x)).
/// The last layer is linear so the output is an unbounded signed distance.
/// Parameters live in one contiguous vector, layer-major, weights then bias.
class FieldNet {
 public:
  FieldNet(NetConfig cfg, std::vector<double> parameters);

  /// Seeded initialisation: first layer U(+-1/fan_in), later layers
  /// U(+-sqrt(6/fan_in)/omega_hidden), biases U(+-1/sqrt(fan_in)).
  static FieldNet init(const NetConfig& cfg, std::uint64_t seed);

  static std::size_t parameter_count(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  int dim() const { return cfg_.dim; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  double eval(const Vec& x) const;
  /// Exact derivatives of eval through the encoding; value equals eval(x).
  FieldJet eval_jet(const Vec& x) const;

  /// Columns of `points` are query points (m x B).
  Eigen::VectorXd eval_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const;
  JetBatch jet_batch(const Eigen::Ref<const Eigen::MatrixXd>& points, int order) const;

  /// Adds to `grad` the parameter gradient of
  ///   sum_b value_cot(b) * D(x_b) + grad_cot(:, b) . grad_x D(x_b).
  /// Passing an empty grad_cot skips the input-gradient path.
  void accumulate_parameter_gradient(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                     const Eigen::Ref<const Eigen::VectorXd>& value_cot,
                                     const Eigen::Ref<const Eigen::MatrixXd>& grad_cot,
                                     std::span<double> grad) const;

 private:
  struct Tape;

  void forward_chunk(const Eigen::Ref<const Eigen::MatrixXd>& points, int order,
                     Tape* tape, Eigen::Ref<Eigen::MatrixXd> out) const;

  NetConfig cfg_;
  std::vector<LayerShape> layers_;
  // Vectorised kernels sum in an order that depends on the buffer's address
  // alignment, so parameters live in aligned storage to keep results
  // independent of where the allocator happens to place them.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
};

}  // namespace curvndf
