#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "acl/matrix.hpp"

namespace acl {

inline constexpr int kUnknownLabel = -1;

// Features of one domain plus optional labels (-1 marks an unknown label).
struct DomainDataset {
  Matrix features;
  std::vector<int> labels;  // empty when the domain is unlabeled
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  bool has_labels() const { return !labels.empty(); }
  // True when every label is known.
  bool fully_labeled() const;

  // Throws DataError on a label count or range violation.
  void validate() const;
};

DomainDataset make_dataset(Matrix features, std::vector<int> labels, std::size_t num_classes,
                           std::string name);

// Binary feature file: "ACLF", u32 version, u32 rows, u32 cols, then
// rows*cols little-endian float32 values in row-major order.
void save_features_binary(const Matrix& features, const std::filesystem::path& path);
Matrix load_features_binary(const std::filesystem::path& path);
Matrix parse_features_binary(std::span<const char> bytes);

struct CsvOptions {
  bool has_header = false;
};

// Comma-separated, '.' decimal point, LF or CRLF line endings. The width of
// the first row is enforced on every following row.
Matrix load_features_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Matrix parse_features_csv(std::string_view text, const CsvOptions& options = {});
void save_features_csv(const Matrix& features, const std::filesystem::path& path);

// Picks the loader from the extension: ".csv" is text, anything else binary.
Matrix load_features(const std::filesystem::path& path, const CsvOptions& options = {});

// Labels are either text (one integer per line) or binary: "ACLL", u32 n,
// n little-endian int32 values. The loader detects the format by magic.
std::vector<int> load_labels(const std::filesystem::path& path);
std::vector<int> parse_labels(std::span<const char> bytes);
void save_labels_binary(const std::vector<int>& labels, const std::filesystem::path& path);
void save_labels_text(const std::vector<int>& labels, const std::filesystem::path& path);

// Parameters of a synthetic partial domain adaptation problem. Classes
// [0, num_shared_classes) appear in both domains; the rest are source-only.
struct SynthSpec {
  std::size_t num_source_classes = 20;
  std::size_t num_shared_classes = 10;
  std::size_t feature_dim = 64;
  std::size_t samples_per_class_source = 100;
  std::size_t samples_per_class_target = 50;
  // Norm of each class mean.
  double class_separation = 4.0;
  // Norm of the global displacement applied to every target sample.
  double shift_magnitude = 3.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Source class c ~ N(mean_c, sigma^2 I); target class c ~ N(mean_c + shift,
// sigma^2 I). Values are rounded to float32 so they survive the binary
// format unchanged. Target labels are kept for evaluation only.
std::pair<DomainDataset, DomainDataset> generate_synthetic_pda(const SynthSpec& spec);

// Class means and the shift vector, in the order the generator draws them.
struct SynthGeometry {
  Matrix class_means;  // num_source_classes x feature_dim
  Matrix shift;        // 1 x feature_dim
};
SynthGeometry synthetic_geometry(const SynthSpec& spec);

}  // namespace acl
