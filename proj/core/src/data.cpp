#include "acl/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "acl/binary_io.hpp"
#include "acl/errors.hpp"
#include "acl/rng.hpp"

namespace acl {

namespace {
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::string_view kFeatureMagic = "ACLF";
constexpr std::string_view kLabelMagic = "ACLL";
}  // namespace

bool DomainDataset::fully_labeled() const {
  if (labels.size() != size()) return false;
  for (int y : labels) {
    if (y == kUnknownLabel) return false;
  }
  return true;
}

void DomainDataset::validate() const {
  if (!labels.empty() && labels.size() != features.rows()) {
    throw DataError(fmt::format("{}: {} labels for {} feature rows", name, labels.size(),
                                features.rows()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y == kUnknownLabel) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError(
          fmt::format("{}: sample {} has label {} outside [0, {})", name, i, y, num_classes));
    }
  }
}

DomainDataset make_dataset(Matrix features, std::vector<int> labels, std::size_t num_classes,
                           std::string name) {
  DomainDataset d{std::move(features), std::move(labels), num_classes, std::move(name)};
  d.validate();
  return d;
}

void save_features_binary(const Matrix& features, const std::filesystem::path& path) {
  if (features.rows() > UINT32_MAX || features.cols() > UINT32_MAX) {
    throw DataError("feature matrix too large for the binary format");
  }
  io::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(features.rows()));
  w.u32(static_cast<std::uint32_t>(features.cols()));
  for (double v : features.values()) w.f32(static_cast<float>(v));
  io::write_file_atomic(path, w.bytes());
}

Matrix parse_features_binary(std::span<const char> bytes) {
  io::ByteReader r(bytes);
  r.section("feature header");
  r.expect_magic(kFeatureMagic);
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) {
    throw FormatError(fmt::format("feature header: unsupported version {} (expected {})", version,
                                  kFeatureVersion));
  }
  const std::uint64_t rows = r.u32();
  const std::uint64_t cols = r.u32();
  r.section("feature payload");
  // rows * cols fits in 64 bits since both are < 2^32.
  const std::uint64_t count = rows * cols;
  if (count * 4 != r.remaining()) {
    throw FormatError(fmt::format(
        "feature payload: header claims {}x{} ({} bytes) but {} bytes follow", rows, cols,
        count * 4, r.remaining()));
  }
  std::vector<double> data(count);
  for (auto& v : data) v = static_cast<double>(r.f32());
  Matrix m(rows, cols, std::move(data));
  if (!all_finite(m)) throw FormatError("feature payload: non-finite value");
  return m;
}

Matrix load_features_binary(const std::filesystem::path& path) {
  return parse_features_binary(io::read_file(path));
}

Matrix parse_features_csv(std::string_view text, const CsvOptions& options) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  bool saw_blank = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && options.has_header) continue;
    if (line.empty()) {
      saw_blank = true;
      continue;
    }
    if (saw_blank) {
      throw FormatError(fmt::format("csv line {}: data after a blank line", line_no));
    }
    std::size_t width = 0;
    std::size_t cell_start = 0;
    for (;;) {
      std::size_t comma = line.find(',', cell_start);
      std::string_view cell =
          line.substr(cell_start, comma == std::string_view::npos ? line.npos : comma - cell_start);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      double v = 0.0;
      const char* first = cell.data();
      if (!cell.empty() && cell.front() == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw FormatError(fmt::format("csv line {}, column {}: not a number: '{}'", line_no,
                                      width + 1, cell));
      }
      data.push_back(v);
      ++width;
      if (comma == std::string_view::npos) break;
      cell_start = comma + 1;
    }
    if (rows == 0) {
      cols = width;
    } else if (width != cols) {
      throw FormatError(
          fmt::format("csv line {}: {} columns, expected {}", line_no, width, cols));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

Matrix load_features_csv(const std::filesystem::path& path, const CsvOptions& options) {
  const auto bytes = io::read_file(path);
  return parse_features_csv(std::string_view(bytes.data(), bytes.size()), options);
}

void save_features_csv(const Matrix& features, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.push_back(',');
      out += fmt::format("{}", row[c]);
    }
    out.push_back('\n');
  }
  io::write_file_atomic(path, out);
}

Matrix load_features(const std::filesystem::path& path, const CsvOptions& options) {
  if (path.extension() == ".csv") return load_features_csv(path, options);
  return load_features_binary(path);
}

std::vector<int> parse_labels(std::span<const char> bytes) {
  if (bytes.size() >= 4 && std::string_view(bytes.data(), 4) == kLabelMagic) {
    io::ByteReader r(bytes);
    r.section("label header");
    r.expect_magic(kLabelMagic);
    const std::uint32_t n = r.u32();
    r.section("label payload");
    if (static_cast<std::uint64_t>(n) * 4 != r.remaining()) {
      throw FormatError(fmt::format("label payload: header claims {} labels but {} bytes follow",
                                    n, r.remaining()));
    }
    std::vector<int> labels(n);
    for (auto& y : labels) y = r.i32();
    return labels;
  }
  std::vector<int> labels;
  std::string_view text(bytes.data(), bytes.size());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    while (!line.empty() && line.back() == ' ') line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty()) continue;
    int y = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), y);
    if (ec != std::errc() || ptr != line.data() + line.size() || y < kUnknownLabel) {
      throw FormatError(fmt::format("label line {}: not a valid label: '{}'", line_no, line));
    }
    labels.push_back(y);
  }
  return labels;
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  return parse_labels(io::read_file(path));
}

void save_labels_binary(const std::vector<int>& labels, const std::filesystem::path& path) {
  if (labels.size() > UINT32_MAX) throw DataError("too many labels for the binary format");
  io::ByteWriter w;
  w.magic(kLabelMagic);
  w.u32(static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) w.i32(y);
  io::write_file_atomic(path, w.bytes());
}

void save_labels_text(const std::vector<int>& labels, const std::filesystem::path& path) {
  std::string out;
  for (int y : labels) out += fmt::format("{}\n", y);
  io::write_file_atomic(path, out);
}

void SynthSpec::validate() const {
  if (num_source_classes == 0) throw ConfigError("synthetic: need at least one source class");
  if (num_shared_classes == 0 || num_shared_classes > num_source_classes) {
    throw ConfigError(fmt::format("synthetic: shared classes ({}) must be in [1, {}]",
                                  num_shared_classes, num_source_classes));
  }
  if (feature_dim == 0) throw ConfigError("synthetic: feature_dim must be positive");
  if (samples_per_class_source == 0 || samples_per_class_target == 0) {
    throw ConfigError("synthetic: samples per class must be positive");
  }
  if (!(class_separation >= 0.0) || !(shift_magnitude >= 0.0) || !(noise_sigma >= 0.0)) {
    throw ConfigError("synthetic: separation, shift and noise must be >= 0");
  }
}

namespace {

Matrix random_direction(std::size_t dim, double norm, RngStream& rng) {
  Matrix v(1, dim);
  double sq = 0.0;
  for (auto& x : v.values()) {
    x = rng.normal();
    sq += x * x;
  }
  const double scale = sq > 0.0 ? norm / std::sqrt(sq) : 0.0;
  for (auto& x : v.values()) x *= scale;
  return v;
}

SynthGeometry draw_geometry(const SynthSpec& spec, RngStream& rng) {
  SynthGeometry g{Matrix(spec.num_source_classes, spec.feature_dim), Matrix()};
  for (std::size_t c = 0; c < spec.num_source_classes; ++c) {
    Matrix mean = random_direction(spec.feature_dim, spec.class_separation, rng);
    std::copy(mean.values().begin(), mean.values().end(), g.class_means.row(c).begin());
  }
  g.shift = random_direction(spec.feature_dim, spec.shift_magnitude, rng);
  return g;
}

void fill_samples(const SynthGeometry& g, const SynthSpec& spec, std::size_t num_classes,
                  std::size_t per_class, bool shifted, RngStream& rng, Matrix& features,
                  std::vector<int>& labels) {
  features = Matrix(num_classes * per_class, spec.feature_dim);
  labels.assign(num_classes * per_class, 0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto mean = g.class_means.row(c);
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      auto out = features.row(row);
      for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        double v = mean[d] + spec.noise_sigma * rng.normal();
        if (shifted) v += g.shift(0, d);
        out[d] = static_cast<double>(static_cast<float>(v));
      }
      labels[row] = static_cast<int>(c);
    }
  }
}

}  // namespace

SynthGeometry synthetic_geometry(const SynthSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed);
  return draw_geometry(spec, rng);
}

std::pair<DomainDataset, DomainDataset> generate_synthetic_pda(const SynthSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed);
  const SynthGeometry g = draw_geometry(spec, rng);
  DomainDataset source;
  DomainDataset target;
  fill_samples(g, spec, spec.num_source_classes, spec.samples_per_class_source, false, rng,
               source.features, source.labels);
  fill_samples(g, spec, spec.num_shared_classes, spec.samples_per_class_target, true, rng,
               target.features, target.labels);
  source.num_classes = spec.num_source_classes;
  target.num_classes = spec.num_source_classes;
  source.name = "synthetic-source";
  target.name = "synthetic-target";
  source.validate();
  target.validate();
  return {std::move(source), std::move(target)};
}

}  // namespace acl
