#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acl/matrix.hpp"
#include "acl/model.hpp"
#include "acl/weighting.hpp"

namespace acl {

// Per-sample class probabilities with a total ranking of classes: by
// descending probability, ties by ascending class id.
struct PredictionSet {
  Matrix probs;
  std::vector<std::uint32_t> ranking;  // size() x num_classes(), row-major
  std::vector<int> labels;             // optional ground truth

  std::size_t size() const { return probs.rows(); }
  std::size_t num_classes() const { return probs.cols(); }
  std::span<const std::uint32_t> ranked(std::size_t sample) const {
    return {ranking.data() + sample * num_classes(), num_classes()};
  }
  std::uint32_t top1(std::size_t sample) const { return ranked(sample)[0]; }
  // 1-based position of `cls` in the sample's ranking.
  std::size_t rank_of(std::size_t sample, std::size_t cls) const;
};

PredictionSet make_prediction_set(Matrix probs, std::vector<int> labels = {});

struct PredictOptions {
  // When set, classes whose active weight is 0 are removed and the
  // remaining probabilities renormalized before ranking.
  const ClassWeightVector* mask_weights = nullptr;
  std::size_t chunk_rows = 1024;
};

PredictionSet predict(const AclModel& model, const Matrix& features,
                      const PredictOptions& options = {});

// Percentage of samples whose top-ranked class equals the label.
double accuracy(const PredictionSet& pred);
// Mean of 1 / rank(true class).
double mean_reciprocal_rank(const PredictionSet& pred);

// CSV with header "sample_index,rank,class_id,probability" and exactly
// top_k rows per sample.
std::string format_predictions_csv(const PredictionSet& pred, std::size_t top_k);
void export_predictions(const PredictionSet& pred, const std::filesystem::path& path,
                        std::size_t top_k);

struct PredictionRow {
  std::size_t sample_index = 0;
  std::size_t rank = 0;
  std::uint32_t class_id = 0;
  double probability = 0.0;
  friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};
std::vector<PredictionRow> parse_predictions_csv(std::string_view text);

// How well one binary domain classifier separates two sets of scores.
// Scores are P(label 1); a sample is predicted label 1 when its score
// exceeds 0.5.
struct DomainSeparation {
  double source_error = 0.0;
  double target_error = 0.0;
  double balanced_error = 0.5;
  // 2 * (1 - 2 * balanced_error), in [-2, 2]
  double proxy_distance = 0.0;
};

double proxy_distance(double balanced_error);
DomainSeparation domain_separation(std::span<const double> source_scores,
                                   std::span<const double> target_scores,
                                   DomainLabeling labeling);

struct DiagnosticsOptions {
  // Optional labels, used only for the informational classifier errors.
  std::span<const int> source_labels;
  std::span<const int> target_labels;
  // Optional per-class source weights for the probe; zero-weight classes
  // are left out of its source side.
  const ClassWeightVector* source_class_weights = nullptr;
  std::size_t probe_iterations = 300;
  double probe_learning_rate = 0.5;
};

// Empirical view of the gap between the encoded domains.
//
// `disc1`/`disc2` score the model's own discriminators on every encoding.
// `probe` is a freshly fitted logistic-regression domain classifier trained
// on the even rows of each domain and scored on the held-out odd rows; its
// proxy distance is the headline `proxy_distance`. Classifier errors are
// reported when labels are supplied (the target one needs target labels,
// so it is only available for synthetic data).
struct DiagnosticsReport {
  DomainSeparation disc1;
  DomainSeparation disc2;
  DomainSeparation probe;
  double proxy_distance = 0.0;
  double disc1_source_loss = 0.0;
  double disc1_target_loss = 0.0;
  double disc2_source_loss = 0.0;
  double disc2_target_loss = 0.0;
  std::optional<double> source_error;
  std::optional<double> target_error;
};

DiagnosticsReport domain_diagnostics(const AclModel& model, const Matrix& source_features,
                                     const Matrix& target_features,
                                     const DiagnosticsOptions& options = {});

std::string format_diagnostics(const DiagnosticsReport& report);

}  // namespace acl
