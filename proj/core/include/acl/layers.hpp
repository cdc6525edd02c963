#pragma once

#include <cstddef>
#include <vector>

#include "acl/matrix.hpp"
#include "acl/rng.hpp"

namespace acl {

// Fully connected layer y = x W + b with gradient accumulators of the same
// shapes. Shapes are fixed at construction.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim);

  std::size_t in_dim() const { return weights_.rows(); }
  std::size_t out_dim() const { return weights_.cols(); }

  Matrix& weights() { return weights_; }
  const Matrix& weights() const { return weights_; }
  Matrix& bias() { return bias_; }
  const Matrix& bias() const { return bias_; }
  Matrix& grad_weights() { return grad_weights_; }
  const Matrix& grad_weights() const { return grad_weights_; }
  Matrix& grad_bias() { return grad_bias_; }
  const Matrix& grad_bias() const { return grad_bias_; }

  // Glorot-uniform weights in [-a, a], a = sqrt(6 / (in + out)); zero bias.
  void init_glorot(RngStream& rng);
  void zero_grad();
  void scale_grad(double s);

 private:
  Matrix weights_;
  Matrix bias_;
  Matrix grad_weights_;
  Matrix grad_bias_;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& x);
// Accumulates x^T * upstream into grad_weights and column sums into
// grad_bias; returns upstream * W^T.
Matrix dense_backward(DenseLayer& layer, const Matrix& x, const Matrix& upstream);
// Same accumulation, without forming the input gradient.
void dense_backward_params(DenseLayer& layer, const Matrix& x, const Matrix& upstream);

Matrix relu_forward(const Matrix& x);
// Passes upstream where x > 0; the subgradient at 0 is 0.
Matrix relu_backward(const Matrix& x, const Matrix& upstream);

struct DropoutResult {
  Matrix output;
  // Per-entry multiplier: 0 for dropped entries, 1/(1-rate) for survivors,
  // 1 everywhere in eval mode.
  Matrix mask;
};

// Inverted dropout. Eval mode and rate 0 are exact identities and draw
// nothing from `rng`.
DropoutResult dropout_forward(const Matrix& x, double rate, RngStream& rng, bool train_mode);
Matrix dropout_backward(const Matrix& mask, const Matrix& upstream);

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

inline constexpr double kProbabilityClamp = 1e-7;

// Logistic sigmoid, clamped to [kProbabilityClamp, 1 - kProbabilityClamp].
Matrix sigmoid_clamped(const Matrix& logits);

}  // namespace acl
