#pragma once

#include <functional>
#include <span>
#include <string>

#include "acl/optim.hpp"

namespace acl {

struct GradCheckResult {
  // max over entries of |analytic - numeric| / max(1, |analytic|)
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// Compares the gradients already stored in `params` against central
// differences of `loss`. Every parameter value is restored afterwards.
// `step` must lie in [1e-8, 1e-4].
GradCheckResult finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamRef> params, double step);

}  // namespace acl
