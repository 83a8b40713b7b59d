#include "curvndf/encode.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace curvndf {

EncodingConfig EncodingConfig::dyadic(int h) {
  if (h < 0) throw std::invalid_argument("number of bands must be non-negative");
  EncodingConfig cfg;
  for (int k = 0; k < h; ++k) cfg.frequencies.push_back(std::ldexp(std::numbers::pi, k));
  return cfg;
}

EncodingConfig EncodingConfig::geometric(int h, double max_frequency) {
  if (h < 0) throw std::invalid_argument("number of bands must be non-negative");
  if (h > 1 && !(max_frequency >= std::numbers::pi)) {
    throw std::invalid_argument("max frequency must be at least pi");
  }
  EncodingConfig cfg;
  for (int k = 0; k < h; ++k) {
    const double frac = h > 1 ? static_cast<double>(k) / (h - 1) : 0.0;
    cfg.frequencies.push_back(std::numbers::pi * std::pow(max_frequency / std::numbers::pi, frac));
  }
  return cfg;
}

// With the maximum at pi every band sits at pi. The sphere and room scenes
// fit best with this low-frequency input; higher maxima made curvature
// targets unstable because the Hessian of the field gets noisy.
EncodingConfig EncodingConfig::defaults() { return geometric(30, std::numbers::pi); }

void EncodingConfig::validate() const {
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    const double w = frequencies[k];
    if (!std::isfinite(w) || w <= 0.0) {
      throw std::invalid_argument("encoding frequency " + std::to_string(k) +
                                  " must be finite and positive");
    }
    if (k > 0 && !(w >= frequencies[k - 1])) {
      throw std::invalid_argument("encoding frequencies must be non-decreasing");
    }
  }
}

int encoded_size(int dim, const EncodingConfig& cfg) { return (2 * cfg.bands() + 1) * dim; }

Eigen::VectorXd encode(const Vec& x, const EncodingConfig& cfg) {
  const int m = static_cast<int>(x.size());
  Eigen::VectorXd out(encoded_size(m, cfg));
  out.head(m) = x;
  for (int k = 0; k < cfg.bands(); ++k) {
    const double w = cfg.frequencies[k];
    for (int c = 0; c < m; ++c) {
      out((2 * k + 1) * m + c) = std::sin(w * x(c));
      out((2 * k + 2) * m + c) = std::cos(w * x(c));
    }
  }
  return out;
}

void encode_batch(const Eigen::Ref<const Eigen::MatrixXd>& points, const EncodingConfig& cfg,
                  Eigen::Ref<Eigen::MatrixXd> out) {
  const Eigen::Index m = points.rows();
  out.topRows(m) = points;
  for (int k = 0; k < cfg.bands(); ++k) {
    const double w = cfg.frequencies[k];
    const Eigen::ArrayXXd phase = w * points.array();
    out.middleRows((2 * k + 1) * m, m) = phase.sin().matrix();
    out.middleRows((2 * k + 2) * m, m) = phase.cos().matrix();
  }
}

Eigen::MatrixXd EncodingJet::jacobian(int dim) const {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(value.size(), dim);
  for (Eigen::Index i = 0; i < value.size(); ++i) j(i, i % dim) = first(i);
  return j;
}

EncodingJet encode_jet(const Vec& x, const EncodingConfig& cfg) {
  const Eigen::Index f = encoded_size(static_cast<int>(x.size()), cfg);
  EncodingJet jet{Eigen::VectorXd(f), Eigen::VectorXd(f), Eigen::VectorXd(f)};
  Eigen::MatrixXd pts = x;
  encode_jet_batch(pts, cfg, jet.value, jet.first, jet.second);
  return jet;
}

void encode_jet_batch(const Eigen::Ref<const Eigen::MatrixXd>& points,
                      const EncodingConfig& cfg, Eigen::Ref<Eigen::MatrixXd> value,
                      Eigen::Ref<Eigen::MatrixXd> first, Eigen::Ref<Eigen::MatrixXd> second) {
  const Eigen::Index m = points.rows();
  value.topRows(m) = points;
  first.topRows(m).setOnes();
  second.topRows(m).setZero();
  for (int k = 0; k < cfg.bands(); ++k) {
    const double w = cfg.frequencies[k];
    const Eigen::ArrayXXd phase = w * points.array();
    const Eigen::ArrayXXd s = phase.sin();
    const Eigen::ArrayXXd c = phase.cos();
    const Eigen::Index sin_row = (2 * k + 1) * m;
    const Eigen::Index cos_row = (2 * k + 2) * m;
    value.middleRows(sin_row, m) = s.matrix();
    value.middleRows(cos_row, m) = c.matrix();
    first.middleRows(sin_row, m) = (w * c).matrix();
    first.middleRows(cos_row, m) = (-w * s).matrix();
    second.middleRows(sin_row, m) = (-w * w * s).matrix();
    second.middleRows(cos_row, m) = (-w * w * c).matrix();
  }
}

}  // namespace curvndf
