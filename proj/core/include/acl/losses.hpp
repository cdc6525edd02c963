#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "acl/matrix.hpp"
#include "acl/model.hpp"

namespace acl {

// Per-iteration values of every objective component.
struct LossReport {
  std::size_t iteration = 0;
  double l_source = 0.0;
  double l_adv_st = 0.0;  // source 0 / target 1 discriminator
  double l_adv_ts = 0.0;  // source 1 / target 0 discriminator
  double l_adv_total = 0.0;
  double l_con = 0.0;
  double l_total = 0.0;
  std::size_t active_classes = 0;

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

struct ClassificationLoss {
  double value = 0.0;
  Matrix grad_logits;  // d value / d pre-softmax logits
};

// Weighted cross entropy, averaged over all N samples. `class_weights` is
// indexed by class; empty means unweighted. Probabilities are clamped at
// kProbabilityClamp before the log.
ClassificationLoss source_classification_loss(const Matrix& probs, std::span<const int> labels,
                                              std::span<const double> class_weights = {});

struct AdversarialLoss {
  double value = 0.0;
  Matrix grad_source_logits;  // N_S x 1, wrt pre-sigmoid logits
  Matrix grad_target_logits;  // N_T x 1
};

// Binary cross entropy of one discriminator. `source_weights` holds one
// multiplier per source sample (empty means all ones); the target term is
// never weighted.
AdversarialLoss adversarial_direction_loss(const Matrix& d_source, const Matrix& d_target,
                                           DomainLabeling labeling,
                                           std::span<const double> source_weights = {});

double adversarial_total_loss(const AdversarialLoss& st, const AdversarialLoss& ts);

struct ConsistencyLoss {
  double value = 0.0;
  double source_term = 0.0;
  double target_term = 0.0;
  Matrix grad_z_source;
  Matrix grad_z_target;
};

// Round-trip reconstruction MSE in both directions. Head gradients are
// accumulated into `model` scaled by `grad_scale`; the returned encoding
// gradients carry the same scale. MSE is averaged over samples and
// dimensions; `source_weights` multiplies each source sample's term.
ConsistencyLoss consistency_loss(const Matrix& z_source, const Matrix& z_target, AclModel& model,
                                 std::span<const double> source_weights, const PassOptions& pass,
                                 double grad_scale = 1.0);

// Forward-only value of consistency_loss.
double consistency_loss_value(const Matrix& z_source, const Matrix& z_target,
                              const AclModel& model, std::span<const double> source_weights,
                              const PassOptions& pass);

double total_objective(double l_source, double l_adv_total, double l_con, double gamma,
                       double beta);

// Maps per-class weights onto samples via their labels.
std::vector<double> per_sample_weights(std::span<const double> class_weights,
                                       std::span<const int> labels);

}  // namespace acl
