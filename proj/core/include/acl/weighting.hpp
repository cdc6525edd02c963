#pragma once

#include <cstddef>
#include <vector>

#include "acl/matrix.hpp"
#include "acl/model.hpp"

namespace acl {

inline constexpr double kDefaultWeightThreshold = 1e-9;

// Per-class source weights estimated from target predictions.
//
// `raw` is the mean predicted target probability of each class. `active` is
// what the losses use: raw entries below `threshold` are zeroed and the
// survivors are divided by the largest survivor, so the strongest class
// weighs exactly 1. If nothing survives, `active` falls back to all ones
// and `fallback` is set.
struct ClassWeightVector {
  std::vector<double> raw;
  std::vector<double> active;
  double threshold = kDefaultWeightThreshold;
  std::size_t updated_at_iteration = 0;
  bool fallback = false;

  // All-ones weights used before the first estimate.
  static ClassWeightVector uniform(std::size_t num_classes);

  std::size_t size() const { return active.size(); }
  std::size_t kept_count() const;
  std::size_t dropped_count() const { return size() - kept_count(); }

  friend bool operator==(const ClassWeightVector&, const ClassWeightVector&) = default;
};

// Thresholds `raw` and (optionally) max-normalizes the survivors.
ClassWeightVector weights_from_raw(std::vector<double> raw, double threshold,
                                   bool normalize = true);

// Eval-mode pass over every target row, `chunk_rows` at a time.
ClassWeightVector estimate_class_weights(const AclModel& model, const Matrix& target_features,
                                         double threshold = kDefaultWeightThreshold,
                                         bool normalize = true, std::size_t chunk_rows = 1024);

// True when weights should be re-estimated before running `iteration`.
bool weight_update_due(std::size_t iteration, std::size_t interval);

}  // namespace acl
