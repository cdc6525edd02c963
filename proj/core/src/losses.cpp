#include "acl/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "acl/errors.hpp"
#include "acl/layers.hpp"

namespace acl {

namespace {

double clamped_log(double p) { return std::log(std::max(p, kProbabilityClamp)); }

void check_weights(std::span<const double> w, std::size_t n, const char* what) {
  if (!w.empty() && w.size() != n) {
    throw DimensionError(fmt::format("{}: {} weights for {} entries", what, w.size(), n));
  }
}

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericError(fmt::format("discriminator output {} outside (0, 1) after clamping", p));
  }
}

// Row-wise squared error of `recon` against `target`, averaged over rows
// and columns, with optional per-row weights. Writes the gradient wrt
// `recon` into `grad` (the gradient wrt `target` is its negation).
double weighted_mse(const Matrix& recon, const Matrix& target, std::span<const double> weights,
                    Matrix& grad) {
  require_shape(recon, target.rows(), target.cols(), "consistency reconstruction");
  grad = Matrix(recon.rows(), recon.cols());
  if (recon.rows() == 0) return 0.0;
  const double norm = 1.0 / static_cast<double>(recon.rows() * recon.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < recon.rows(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    auto r = recon.row(i);
    auto t = target.row(i);
    auto g = grad.row(i);
    double row_sum = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const double diff = r[c] - t[c];
      row_sum += diff * diff;
      g[c] = 2.0 * w * diff * norm;
    }
    total += w * row_sum;
  }
  return total * norm;
}

}  // namespace

ClassificationLoss source_classification_loss(const Matrix& probs, std::span<const int> labels,
                                              std::span<const double> class_weights) {
  if (labels.size() != probs.rows()) {
    throw DimensionError(
        fmt::format("{} labels for {} probability rows", labels.size(), probs.rows()));
  }
  check_weights(class_weights, probs.cols(), "class weights");
  ClassificationLoss out{0.0, Matrix(probs.rows(), probs.cols())};
  if (probs.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw DataError(fmt::format("sample {}: label {} outside [0, {})", i, y, probs.cols()));
    }
    const double w = class_weights.empty() ? 1.0 : class_weights[y];
    const double p_true = probs(i, y);
    out.value -= w * clamped_log(p_true);
    // Inside the clamp the loss is flat, so the gradient vanishes.
    if (w != 0.0 && p_true >= kProbabilityClamp) {
      auto g = out.grad_logits.row(i);
      auto p = probs.row(i);
      for (std::size_t c = 0; c < g.size(); ++c) g[c] = w * p[c] * inv_n;
      g[y] -= w * inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

AdversarialLoss adversarial_direction_loss(const Matrix& d_source, const Matrix& d_target,
                                           DomainLabeling labeling,
                                           std::span<const double> source_weights) {
  require_shape(d_source, d_source.rows(), 1, "source discriminator output");
  require_shape(d_target, d_target.rows(), 1, "target discriminator output");
  check_weights(source_weights, d_source.rows(), "source sample weights");

  // Loss term for a sample whose domain label is `label`:
  //   label 1: -log p,      d/dlogit = -(1 - p)
  //   label 0: -log(1 - p), d/dlogit = p
  // At the clamp boundary the loss is flat and the gradient is zero.
  auto term = [](double p, int label, double& grad) {
    check_probability(p);
    const bool clamped = p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp;
    if (label == 1) {
      grad = clamped ? 0.0 : -(1.0 - p);
      return -std::log(p);
    }
    grad = clamped ? 0.0 : p;
    return -std::log1p(-p);
  };

  const int source_label = labeling == DomainLabeling::source_zero ? 0 : 1;
  const int target_label = 1 - source_label;

  AdversarialLoss out{0.0, Matrix(d_source.rows(), 1), Matrix(d_target.rows(), 1)};
  if (d_source.rows() > 0) {
    const double inv_n = 1.0 / static_cast<double>(d_source.rows());
    double sum = 0.0;
    for (std::size_t i = 0; i < d_source.rows(); ++i) {
      const double w = source_weights.empty() ? 1.0 : source_weights[i];
      double g = 0.0;
      sum += w * term(d_source(i, 0), source_label, g);
      out.grad_source_logits(i, 0) = w * g * inv_n;
    }
    out.value += sum * inv_n;
  }
  if (d_target.rows() > 0) {
    const double inv_n = 1.0 / static_cast<double>(d_target.rows());
    double sum = 0.0;
    for (std::size_t j = 0; j < d_target.rows(); ++j) {
      double g = 0.0;
      sum += term(d_target(j, 0), target_label, g);
      out.grad_target_logits(j, 0) = g * inv_n;
    }
    out.value += sum * inv_n;
  }
  return out;
}

double adversarial_total_loss(const AdversarialLoss& st, const AdversarialLoss& ts) {
  return st.value + ts.value;
}

ConsistencyLoss consistency_loss(const Matrix& z_source, const Matrix& z_target, AclModel& model,
                                 std::span<const double> source_weights, const PassOptions& pass,
                                 double grad_scale) {
  check_weights(source_weights, z_source.rows(), "source sample weights");
  ConsistencyLoss out;
  const RoundTripCache src = map_round_trip_cached(model, z_source, Direction::source, pass);
  const RoundTripCache tgt = map_round_trip_cached(model, z_target, Direction::target, pass);

  Matrix g_src, g_tgt;
  out.source_term = weighted_mse(src.output(), z_source, source_weights, g_src);
  out.target_term = weighted_mse(tgt.output(), z_target, {}, g_tgt);
  out.value = out.source_term + out.target_term;

  scale_in_place(g_src, grad_scale);
  scale_in_place(g_tgt, grad_scale);
  // z feeds the loss twice: as the round-trip input and as the MSE target.
  out.grad_z_source = map_round_trip_backward(model, src, Direction::source, g_src);
  out.grad_z_target = map_round_trip_backward(model, tgt, Direction::target, g_tgt);
  add_in_place(out.grad_z_source, scaled(g_src, -1.0));
  add_in_place(out.grad_z_target, scaled(g_tgt, -1.0));
  return out;
}

double consistency_loss_value(const Matrix& z_source, const Matrix& z_target,
                              const AclModel& model, std::span<const double> source_weights,
                              const PassOptions& pass) {
  check_weights(source_weights, z_source.rows(), "source sample weights");
  Matrix unused;
  const Matrix src = map_round_trip(model, z_source, Direction::source, pass);
  const Matrix tgt = map_round_trip(model, z_target, Direction::target, pass);
  return weighted_mse(src, z_source, source_weights, unused) +
         weighted_mse(tgt, z_target, {}, unused);
}

double total_objective(double l_source, double l_adv_total, double l_con, double gamma,
                       double beta) {
  return l_source + gamma * l_adv_total + beta * l_con;
}

std::vector<double> per_sample_weights(std::span<const double> class_weights,
                                       std::span<const int> labels) {
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= class_weights.size()) {
      throw DataError(
          fmt::format("sample {}: label {} outside [0, {})", i, y, class_weights.size()));
    }
    out[i] = class_weights[y];
  }
  return out;
}

}  // namespace acl
