#pragma once

#include "curvndf/geom.hpp"

#include <Eigen/Core>

#include <vector>

namespace curvndf {

/// Frequency bands of the positional encoding, in radians per canonical unit.
struct EncodingConfig {
  std::vector<double> frequencies;

  int bands() const { return static_cast<int>(frequencies.size()); }

  /// omega_k = 2^(k-1) * pi, k = 1..h.
  static EncodingConfig dyadic(int h);
  /// h bands geometrically spaced from pi to max_frequency (inclusive).
  static EncodingConfig geometric(int h, double max_frequency);
  static EncodingConfig defaults();

  /// Throws std::invalid_argument unless frequencies are finite, positive
  /// and non-decreasing. Repeated bands are allowed; the default uses them.
  void validate() const;
};

/// Length of the encoded vector: (2h + 1) * m.
int encoded_size(int dim, const EncodingConfig& cfg);

/// Layout [x, sin(w1 x), cos(w1 x), ..., sin(wh x), cos(wh x)], each block m
/// wide. Feature i depends only on coordinate i % m.
Eigen::VectorXd encode(const Vec& x, const EncodingConfig& cfg);

/// Encodes the columns of `points` (m x B) into `out` ((2h+1)m x B).
void encode_batch(const Eigen::Ref<const Eigen::MatrixXd>& points, const EncodingConfig& cfg,
                  Eigen::Ref<Eigen::MatrixXd> out);

/// Analytic derivatives of the encoding. Because every feature depends on a
/// single coordinate, the Jacobian has one non-zero per row and the Hessian
/// of each feature has a single (c, c) entry.
struct EncodingJet {
  Eigen::VectorXd value;
  Eigen::VectorXd first;   // d f_i / d x_{i % m}
  Eigen::VectorXd second;  // d^2 f_i / d x_{i % m}^2

  Eigen::MatrixXd jacobian(int dim) const;
};

EncodingJet encode_jet(const Vec& x, const EncodingConfig& cfg);

/// Batched variant: fills value/first/second matrices, each (2h+1)m x B.
void encode_jet_batch(const Eigen::Ref<const Eigen::MatrixXd>& points,
                      const EncodingConfig& cfg, Eigen::Ref<Eigen::MatrixXd> value,
                      Eigen::Ref<Eigen::MatrixXd> first, Eigen::Ref<Eigen::MatrixXd> second);

}  // namespace curvndf
