#include "acl/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

namespace {

void check_step_inputs(std::span<const ParamRef> params, double lr, std::string_view group) {
  if (!(lr > 0.0)) throw ConfigError(fmt::format("learning rate must be > 0, got {}", lr));
  for (const auto& p : params) {
    require_shape(*p.grad, p.value->rows(), p.value->cols(), p.name);
    if (!all_finite(*p.grad)) {
      throw NumericError(
          fmt::format("non-finite gradient in parameter group '{}' ({})", group, p.name));
    }
  }
}

}  // namespace

AdamState AdamState::for_params(std::span<const ParamRef> params) {
  AdamState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value->rows(), p.value->cols());
    s.second_moment.emplace_back(p.value->rows(), p.value->cols());
  }
  return s;
}

void adam_step(std::span<const ParamRef> params, AdamState& state, double lr,
               std::string_view group) {
  check_step_inputs(params, lr, group);
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError(fmt::format("Adam state for '{}' tracks {} tensors, got {}", group,
                                     state.first_moment.size(), params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value->values();
    auto grad = params[i].grad->values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    if (m.size() != value.size() || v.size() != value.size()) {
      throw DimensionError(
          fmt::format("Adam accumulator shape mismatch for {}", params[i].name));
    }
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void sgd_step(std::span<const ParamRef> params, double lr, std::string_view group) {
  check_step_inputs(params, lr, group);
  for (const auto& p : params) {
    auto value = p.value->values();
    auto grad = p.grad->values();
    for (std::size_t k = 0; k < value.size(); ++k) value[k] -= lr * grad[k];
  }
}

}  // namespace acl
