#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acl/matrix.hpp"

namespace acl {

// Non-owning view of one trainable tensor and its gradient.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

// Moment accumulators for one parameter group. Defaults follow Keras' Adam.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  // Zero accumulators shaped like `params`.
  static AdamState for_params(std::span<const ParamRef> params);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update of every tensor in `params`. `group` names the
// parameter group in error messages.
void adam_step(std::span<const ParamRef> params, AdamState& state, double lr,
               std::string_view group);

// Plain gradient descent: value -= lr * grad.
void sgd_step(std::span<const ParamRef> params, double lr, std::string_view group);

}  // namespace acl
