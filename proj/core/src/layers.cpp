#include "acl/layers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim)
    : weights_(in_dim, out_dim),
      bias_(1, out_dim),
      grad_weights_(in_dim, out_dim),
      grad_bias_(1, out_dim) {}

void DenseLayer::init_glorot(RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (auto& w : weights_.values()) w = rng.uniform(-a, a);
  bias_.fill(0.0);
}

void DenseLayer::zero_grad() {
  grad_weights_.fill(0.0);
  grad_bias_.fill(0.0);
}

void DenseLayer::scale_grad(double s) {
  scale_in_place(grad_weights_, s);
  scale_in_place(grad_bias_, s);
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw DimensionError(fmt::format("dense_forward: input {} does not match weights {}",
                                     x.shape_string(), layer.weights().shape_string()));
  }
  Matrix out = matmul(x, layer.weights());
  const auto b = layer.bias().row(0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  ensure_finite(out, "dense layer output");
  return out;
}

void dense_backward_params(DenseLayer& layer, const Matrix& x, const Matrix& upstream) {
  if (x.cols() != layer.in_dim() || upstream.rows() != x.rows() ||
      upstream.cols() != layer.out_dim()) {
    throw DimensionError(fmt::format(
        "dense_backward: input {} / upstream {} do not match weights {}", x.shape_string(),
        upstream.shape_string(), layer.weights().shape_string()));
  }
  add_in_place(layer.grad_weights(), matmul_at_b(x, upstream));
  add_in_place(layer.grad_bias(), column_sums(upstream));
}

Matrix dense_backward(DenseLayer& layer, const Matrix& x, const Matrix& upstream) {
  dense_backward_params(layer, x, upstream);
  return matmul_a_bt(upstream, layer.weights());
}

Matrix relu_forward(const Matrix& x) {
  Matrix out = x;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
  require_shape(upstream, x.rows(), x.cols(), "relu_backward upstream");
  Matrix out = upstream;
  auto xv = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!(xv[i] > 0.0)) o[i] = 0.0;
  }
  return out;
}

DropoutResult dropout_forward(const Matrix& x, double rate, RngStream& rng, bool train_mode) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError(fmt::format("dropout rate {} outside [0, 1)", rate));
  }
  if (!train_mode || rate == 0.0) {
    return {x, Matrix(x.rows(), x.cols(), 1.0)};
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  Matrix out(x.rows(), x.cols());
  auto m = mask.values();
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    o[i] = xv[i] * m[i];
  }
  return {std::move(out), std::move(mask)};
}

Matrix dropout_backward(const Matrix& mask, const Matrix& upstream) {
  require_shape(upstream, mask.rows(), mask.cols(), "dropout_backward upstream");
  Matrix out = upstream;
  auto m = mask.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= m[i];
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (auto& v : o) v /= sum;
  }
  ensure_finite(out, "softmax output");
  return out;
}

Matrix sigmoid_clamped(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  auto in = logits.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double a = in[i];
    // Branches keep exp() from overflowing for large |a|.
    const double s = a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
    o[i] = std::clamp(s, kProbabilityClamp, 1.0 - kProbabilityClamp);
  }
  return out;
}

}  // namespace acl
