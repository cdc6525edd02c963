#include "acl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

namespace {
double finite_loss(const std::function<double()>& loss) {
  const double v = loss();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
  return v;
}
}  // namespace

GradCheckResult finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamRef> params, double step) {
  if (!(step >= 1e-8 && step <= 1e-4)) {
    throw ConfigError(fmt::format("finite difference step {} outside [1e-8, 1e-4]", step));
  }
  GradCheckResult result;
  for (const auto& p : params) {
    auto value = p.value->values();
    auto grad = p.grad->values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double saved = value[k];
      value[k] = saved + step;
      const double up = finite_loss(loss);
      value[k] = saved - step;
      const double down = finite_loss(loss);
      value[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(grad[k] - numeric) / std::max(1.0, std::abs(grad[k]));
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = p.name;
        result.worst_index = k;
      }
    }
  }
  return result;
}

}  // namespace acl
