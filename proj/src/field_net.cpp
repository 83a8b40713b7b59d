#include "curvndf/field_net.hpp"

#include "curvndf/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace curvndf {
namespace {

constexpr Eigen::Index kChunk = 256;

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

int packed_size(int m) { return m * (m + 1) / 2; }

int block_count(int order, int m) {
  return 1 + (order >= 1 ? m : 0) + (order >= 2 ? packed_size(m) : 0);
}

// Packed index of the (j, k) Hessian entry, j <= k.
int pair_index(int j, int k, int m) {
  int idx = 0;
  for (int r = 0; r < j; ++r) idx += m - r;
  return idx + (k - j);
}

double uniform_symmetric(std::mt19937_64& rng, double a) { return uniform(rng, -a, a); }

}  // namespace

void NetConfig::validate() const {
  check_dim(dim);
  encoding.validate();
  if (hidden_width <= 0) throw std::invalid_argument("hidden width must be positive (zero fan-in)");
  if (hidden_layers <= 0) throw std::invalid_argument("at least one hidden layer is required");
  if (!(omega_first > 0.0) || !(omega_hidden > 0.0)) {
    throw std::invalid_argument("sine frequency factors must be positive");
  }
}

std::vector<int> NetConfig::layer_sizes() const {
  std::vector<int> sizes{encoded_size(dim, encoding)};
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_width);
  sizes.push_back(1);
  return sizes;
}

Mat JetBatch::hessian(Eigen::Index i) const {
  const int m = static_cast<int>(gradient.rows());
  Mat h(m, m);
  for (int j = 0; j < m; ++j) {
    for (int k = j; k < m; ++k) {
      h(j, k) = h(k, j) = hessian_packed(pair_index(j, k, m), i);
    }
  }
  return h;
}

FieldJet JetBatch::jet(Eigen::Index i) const {
  FieldJet j;
  j.value = value(i);
  if (order >= 1) j.gradient = gradient.col(i);
  if (order >= 2) j.hessian = hessian(i);
  return j;
}

struct FieldNet::Tape {
  Eigen::MatrixXd enc_value;
  Eigen::MatrixXd enc_first;
  std::vector<Eigen::MatrixXd> pre;    // Z of each sine layer, all blocks
  std::vector<Eigen::ArrayXXd> sines;  // sin(omega Z0)
  std::vector<Eigen::ArrayXXd> cosines;
  std::vector<Eigen::MatrixXd> post;   // activations, input of the next layer
};

std::size_t FieldNet::parameter_count(const NetConfig& cfg) {
  const std::vector<int> sizes = cfg.layer_sizes();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    n += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  }
  return n;
}

FieldNet::FieldNet(NetConfig cfg, std::vector<double> parameters)
    : cfg_(std::move(cfg)), params_(parameters.begin(), parameters.end()) {
  cfg_.validate();
  const std::vector<int> sizes = cfg_.layer_sizes();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    LayerShape s;
    s.in = sizes[l];
    s.out = sizes[l + 1];
    s.weight_offset = offset;
    offset += static_cast<std::size_t>(s.in) * s.out;
    s.bias_offset = offset;
    offset += static_cast<std::size_t>(s.out);
    s.sine = l + 2 < sizes.size();
    s.omega = s.sine ? (l == 0 ? cfg_.omega_first : cfg_.omega_hidden) : 1.0;
    layers_.push_back(s);
  }
  if (params_.size() != offset) {
    throw std::invalid_argument("parameter vector has " + std::to_string(params_.size()) +
                                " entries, layer shapes need " + std::to_string(offset));
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw std::invalid_argument("network parameters must be finite");
  }
}

FieldNet FieldNet::init(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::vector<int> sizes = cfg.layer_sizes();
  std::mt19937_64 rng(seed);
  std::vector<double> params;
  params.reserve(parameter_count(cfg));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    if (fan_in <= 0) throw std::invalid_argument("zero fan-in");
    const double bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / cfg.omega_hidden;
    for (int i = 0; i < fan_in * fan_out; ++i) params.push_back(uniform_symmetric(rng, bound));
    const double bias_bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_out; ++i) params.push_back(uniform_symmetric(rng, bias_bound));
  }
  return FieldNet(cfg, std::move(params));
}

void FieldNet::forward_chunk(const Eigen::Ref<const Eigen::MatrixXd>& points, int order,
                             Tape* tape, Eigen::Ref<Eigen::MatrixXd> out) const {
  const int m = cfg_.dim;
  const Eigen::Index n = points.cols();
  const int nb = block_count(order, m);
  const int features = layers_.front().in;
  const int per_axis = features / m;

  Eigen::MatrixXd ev(features, n), e1, e2;
  if (order == 0) {
    encode_batch(points, cfg_.encoding, ev);
  } else {
    e1.resize(features, n);
    e2.resize(features, n);
    encode_jet_batch(points, cfg_.encoding, ev, e1, e2);
  }

  // First layer. Each encoded feature depends on a single coordinate, so the
  // derivative blocks only touch the matching weight columns.
  const LayerShape& first = layers_.front();
  ConstMatMap w0(params_.data() + first.weight_offset, first.out, first.in);
  ConstVecMap b0(params_.data() + first.bias_offset, first.out);
  Eigen::MatrixXd z(first.out, nb * n);
  z.leftCols(n).noalias() = w0 * ev;
  z.leftCols(n).colwise() += b0;
  if (order >= 1) {
    for (int c = 0; c < m; ++c) {
      const auto rows = Eigen::seqN(c, per_axis, m);
      const Eigen::MatrixXd wc = w0(Eigen::all, rows);
      const Eigen::MatrixXd e1c = e1(rows, Eigen::all);
      z.middleCols((1 + c) * n, n).noalias() = wc * e1c;
      if (order >= 2) {
        for (int k = c; k < m; ++k) {
          auto block = z.middleCols((1 + m + pair_index(c, k, m)) * n, n);
          if (k == c) {
            const Eigen::MatrixXd e2c = e2(rows, Eigen::all);
            block.noalias() = wc * e2c;
          } else {
            block.setZero();
          }
        }
      }
    }
  }
  if (tape != nullptr) {
    tape->enc_value = std::move(ev);
    tape->enc_first = std::move(e1);
  }

  Eigen::MatrixXd a(first.out, nb * n);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerShape& layer = layers_[l];
    if (l > 0) {
      ConstMatMap w(params_.data() + layer.weight_offset, layer.out, layer.in);
      ConstVecMap b(params_.data() + layer.bias_offset, layer.out);
      z.resize(layer.out, nb * n);
      z.noalias() = w * a;
      z.leftCols(n).colwise() += b;
    }
    if (!layer.sine) break;

    const double om = layer.omega;
    Eigen::ArrayXXd s = (om * z.leftCols(n).array()).sin();
    Eigen::ArrayXXd c = (om * z.leftCols(n).array()).cos();
    a.resize(layer.out, nb * n);
    a.leftCols(n) = s.matrix();
    if (order >= 1) {
      const Eigen::ArrayXXd om_c = om * c;
      for (int j = 0; j < m; ++j) {
        a.middleCols((1 + j) * n, n) = (om_c * z.middleCols((1 + j) * n, n).array()).matrix();
      }
      if (order >= 2) {
        const Eigen::ArrayXXd om2_s = om * om * s;
        for (int j = 0; j < m; ++j) {
          for (int k = j; k < m; ++k) {
            const Eigen::Index col = (1 + m + pair_index(j, k, m)) * n;
            a.middleCols(col, n) =
                (om_c * z.middleCols(col, n).array() -
                 om2_s * z.middleCols((1 + j) * n, n).array() *
                     z.middleCols((1 + k) * n, n).array())
                    .matrix();
          }
        }
      }
    }
    if (tape != nullptr) {
      tape->pre.push_back(z);
      tape->sines.push_back(std::move(s));
      tape->cosines.push_back(std::move(c));
      tape->post.push_back(a);
    }
  }

  for (int k = 0; k < nb; ++k) out.row(k) = z.block(0, k * n, 1, n);
}

double FieldNet::eval(const Vec& x) const {
  Eigen::MatrixXd pts = x;
  return eval_batch(pts)(0);
}

FieldJet FieldNet::eval_jet(const Vec& x) const {
  Eigen::MatrixXd pts = x;
  FieldJet jet = jet_batch(pts, 2).jet(0);
  jet.value = eval(x);
  return jet;
}

Eigen::VectorXd FieldNet::eval_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (points.rows() != cfg_.dim) throw std::invalid_argument("point dimension mismatch");
  const Eigen::Index n = points.cols();
  Eigen::VectorXd values(n);
  Eigen::MatrixXd out(1, kChunk);
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    out.resize(1, len);
    forward_chunk(points.middleCols(start, len), 0, nullptr, out);
    values.segment(start, len) = out.row(0).transpose();
  }
  return values;
}

JetBatch FieldNet::jet_batch(const Eigen::Ref<const Eigen::MatrixXd>& points, int order) const {
  if (points.rows() != cfg_.dim) throw std::invalid_argument("point dimension mismatch");
  if (order < 0 || order > 2) throw std::invalid_argument("jet order must be 0, 1 or 2");
  const int m = cfg_.dim;
  const Eigen::Index n = points.cols();
  JetBatch jets;
  jets.order = order;
  jets.value.resize(n);
  if (order >= 1) jets.gradient.resize(m, n);
  if (order >= 2) jets.hessian_packed.resize(packed_size(m), n);
  Eigen::MatrixXd out;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    out.resize(block_count(order, m), len);
    forward_chunk(points.middleCols(start, len), order, nullptr, out);
    jets.value.segment(start, len) = out.row(0).transpose();
    if (order >= 1) jets.gradient.middleCols(start, len) = out.middleRows(1, m);
    if (order >= 2) {
      jets.hessian_packed.middleCols(start, len) = out.middleRows(1 + m, packed_size(m));
    }
  }
  return jets;
}

void FieldNet::accumulate_parameter_gradient(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                             const Eigen::Ref<const Eigen::VectorXd>& value_cot,
                                             const Eigen::Ref<const Eigen::MatrixXd>& grad_cot,
                                             std::span<double> out_grad) const {
  const int m = cfg_.dim;
  const Eigen::Index total = points.cols();
  if (points.rows() != m || value_cot.size() != total) {
    throw std::invalid_argument("cotangent shape mismatch");
  }
  const bool with_grad = grad_cot.size() > 0;
  if (with_grad && (grad_cot.rows() != m || grad_cot.cols() != total)) {
    throw std::invalid_argument("gradient cotangent shape mismatch");
  }
  if (out_grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  // Accumulate in aligned scratch for the same reason params_ is aligned.
  Eigen::VectorXd scratch = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params_.size()));
  const std::span<double> grad(scratch.data(), params_.size());
  const int order = with_grad ? 1 : 0;
  const int nb = block_count(order, m);
  const int features = layers_.front().in;
  const int per_axis = features / m;

  for (Eigen::Index start = 0; start < total; start += kChunk) {
    const Eigen::Index n = std::min(kChunk, total - start);
    Tape tape;
    Eigen::MatrixXd out(nb, n);
    forward_chunk(points.middleCols(start, n), order, &tape, out);

    // Cotangent of the output row, laid out like the forward blocks.
    Eigen::RowVectorXd g(nb * n);
    g.head(n) = value_cot.segment(start, n).transpose();
    for (int c = 0; c < m && with_grad; ++c) {
      g.segment((1 + c) * n, n) = grad_cot.block(c, start, 1, n);
    }

    const LayerShape& last = layers_.back();
    const Eigen::MatrixXd& a_last = tape.post.back();
    MatMap dw_last(grad.data() + last.weight_offset, last.out, last.in);
    dw_last.noalias() += g * a_last.transpose();
    grad[last.bias_offset] += g.head(n).sum();
    ConstMatMap w_last(params_.data() + last.weight_offset, last.out, last.in);
    Eigen::MatrixXd abar = w_last.transpose() * g;

    for (int l = static_cast<int>(layers_.size()) - 2; l >= 0; --l) {
      const LayerShape& layer = layers_[l];
      const double om = layer.omega;
      const Eigen::ArrayXXd om_c = om * tape.cosines[l];
      const Eigen::MatrixXd& z = tape.pre[l];
      Eigen::MatrixXd zbar(layer.out, nb * n);
      zbar.leftCols(n) = (abar.leftCols(n).array() * om_c).matrix();
      if (with_grad) {
        const Eigen::ArrayXXd om2_s = om * om * tape.sines[l];
        for (int c = 0; c < m; ++c) {
          const auto ac = abar.middleCols((1 + c) * n, n).array();
          zbar.middleCols((1 + c) * n, n) = (ac * om_c).matrix();
          zbar.leftCols(n).array() -= ac * om2_s * z.middleCols((1 + c) * n, n).array();
        }
      }
      MatMap dw(grad.data() + layer.weight_offset, layer.out, layer.in);
      VecMap db(grad.data() + layer.bias_offset, layer.out);
      db += zbar.leftCols(n).rowwise().sum();
      if (l > 0) {
        dw.noalias() += zbar * tape.post[l - 1].transpose();
        ConstMatMap w(params_.data() + layer.weight_offset, layer.out, layer.in);
        abar.noalias() = w.transpose() * zbar;
      } else {
        dw.noalias() += zbar.leftCols(n) * tape.enc_value.transpose();
        for (int c = 0; c < m && with_grad; ++c) {
          const auto rows = Eigen::seqN(c, per_axis, m);
          const Eigen::MatrixXd first_c = tape.enc_first(rows, Eigen::all);
          dw(Eigen::all, rows) += zbar.middleCols((1 + c) * n, n) * first_c.transpose();
        }
      }
    }
  }
  for (std::size_t i = 0; i < out_grad.size(); ++i) out_grad[i] += grad[i];
}

}  // namespace curvndf
