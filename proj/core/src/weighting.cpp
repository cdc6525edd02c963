#include "acl/weighting.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

ClassWeightVector ClassWeightVector::uniform(std::size_t num_classes) {
  ClassWeightVector w;
  w.raw.assign(num_classes, num_classes == 0 ? 0.0 : 1.0 / static_cast<double>(num_classes));
  w.active.assign(num_classes, 1.0);
  return w;
}

std::size_t ClassWeightVector::kept_count() const {
  return static_cast<std::size_t>(
      std::count_if(active.begin(), active.end(), [](double a) { return a > 0.0; }));
}

ClassWeightVector weights_from_raw(std::vector<double> raw, double threshold, bool normalize) {
  if (!(threshold >= 0.0)) {
    throw ConfigError(fmt::format("weight threshold must be >= 0, got {}", threshold));
  }
  ClassWeightVector w;
  w.threshold = threshold;
  w.raw = std::move(raw);
  w.active = w.raw;
  double largest = 0.0;
  for (auto& a : w.active) {
    if (a < threshold) a = 0.0;
    largest = std::max(largest, a);
  }
  if (largest <= 0.0) {
    w.active.assign(w.raw.size(), 1.0);
    w.fallback = true;
    return w;
  }
  if (normalize) {
    for (auto& a : w.active) a /= largest;
  }
  return w;
}

ClassWeightVector estimate_class_weights(const AclModel& model, const Matrix& target_features,
                                         double threshold, bool normalize,
                                         std::size_t chunk_rows) {
  if (target_features.rows() == 0) {
    throw DataError("cannot estimate class weights from an empty target set");
  }
  if (chunk_rows == 0) chunk_rows = target_features.rows();
  const std::size_t n = target_features.rows();
  std::vector<double> sums(model.dims().num_classes, 0.0);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += chunk_rows) {
    const std::size_t stop = std::min(n, start + chunk_rows);
    idx.resize(stop - start);
    for (std::size_t i = start; i < stop; ++i) idx[i - start] = i;
    const Matrix probs = classify(model, encode(model, gather_rows(target_features, idx)));
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto row = probs.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) sums[c] += row[c];
    }
  }
  for (auto& s : sums) s /= static_cast<double>(n);
  return weights_from_raw(std::move(sums), threshold, normalize);
}

bool weight_update_due(std::size_t iteration, std::size_t interval) {
  if (interval == 0) throw ConfigError("weight update interval must be >= 1");
  return iteration % interval == 0;
}

}  // namespace acl
