#include "acl/model_io.hpp"

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

namespace {

constexpr std::string_view kModelMagic = "ACLM";
// Keeps a hostile header from requesting absurd allocations.
constexpr std::uint64_t kMaxDim = 1u << 24;

enum ConfigFlag : std::uint32_t {
  kNormalizeWeights = 1u << 0,
  kWeightConsistency = 1u << 1,
  kDisableWeighting = 1u << 2,
  kDisableConsistency = 1u << 3,
  kSingleDirection = 1u << 4,
  kHasEncoderOut = 1u << 5,
};

std::size_t checked_dim(io::ByteReader& r, const char* name) {
  const std::uint64_t v = r.u32();
  if (v == 0 || v > kMaxDim) {
    throw FormatError(fmt::format("{}: {} = {} outside [1, {}]", r.section(), name, v, kMaxDim));
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_config(io::ByteWriter& w, const TrainConfig& c) {
  w.f64(c.gamma);
  w.f64(c.beta);
  w.f64(c.tau);
  w.f64(c.lr);
  w.f64(c.dropout_rate);
  w.f64(c.weight_threshold);
  w.u64(c.batch_size);
  w.u64(c.iterations);
  w.u64(c.weight_update_interval);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.optimizer));
  w.u32(static_cast<std::uint32_t>(c.disc_scaling));
  std::uint32_t flags = 0;
  if (c.normalize_weights) flags |= kNormalizeWeights;
  if (c.weight_consistency) flags |= kWeightConsistency;
  if (c.disable_weighting) flags |= kDisableWeighting;
  if (c.disable_consistency) flags |= kDisableConsistency;
  if (c.single_direction_adversarial) flags |= kSingleDirection;
  if (c.encoder_out) flags |= kHasEncoderOut;
  w.u32(flags);
  w.u64(c.encoder_hidden);
  w.u64(c.encoder_out.value_or(0));
  w.u64(c.disc_hidden);
}

TrainConfig read_config(io::ByteReader& r) {
  r.section("hyperparameters");
  TrainConfig c;
  c.gamma = r.f64();
  c.beta = r.f64();
  c.tau = r.f64();
  c.lr = r.f64();
  c.dropout_rate = r.f64();
  c.weight_threshold = r.f64();
  c.batch_size = r.u64();
  c.iterations = r.u64();
  c.weight_update_interval = r.u64();
  c.seed = r.u64();
  const std::uint32_t optimizer = r.u32();
  const std::uint32_t scaling = r.u32();
  if (optimizer > 1 || scaling > 1) {
    throw FormatError("hyperparameters: unknown optimizer or discriminator scaling code");
  }
  c.optimizer = static_cast<OptimizerKind>(optimizer);
  c.disc_scaling = static_cast<DiscriminatorScaling>(scaling);
  const std::uint32_t flags = r.u32();
  c.normalize_weights = flags & kNormalizeWeights;
  c.weight_consistency = flags & kWeightConsistency;
  c.disable_weighting = flags & kDisableWeighting;
  c.disable_consistency = flags & kDisableConsistency;
  c.single_direction_adversarial = flags & kSingleDirection;
  c.encoder_hidden = r.u64();
  const std::uint64_t encoder_out = r.u64();
  if (flags & kHasEncoderOut) c.encoder_out = encoder_out;
  c.disc_hidden = r.u64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(fmt::format("hyperparameters: {}", e.what()));
  }
  return c;
}

void write_matrix(io::ByteWriter& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) w.f64(v);
}

Matrix read_matrix(io::ByteReader& r, std::size_t rows, std::size_t cols) {
  const std::uint32_t got_rows = r.u32();
  const std::uint32_t got_cols = r.u32();
  if (got_rows != rows || got_cols != cols) {
    throw FormatError(fmt::format("{}: shape {}x{}, expected {}x{}", r.section(), got_rows,
                                  got_cols, rows, cols));
  }
  r.require(static_cast<std::uint64_t>(rows) * cols, 8);
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = r.f64();
  return Matrix(rows, cols, std::move(data));
}

void write_dims(io::ByteWriter& w, const ModelDims& d) {
  for (std::size_t v : {d.feature_dim, d.encoder_hidden, d.encoder_out, d.num_classes,
                        d.disc_hidden}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
}

ModelDims read_dims(io::ByteReader& r) {
  r.section("dims");
  ModelDims d;
  d.feature_dim = checked_dim(r, "feature_dim");
  d.encoder_hidden = checked_dim(r, "encoder_hidden");
  d.encoder_out = checked_dim(r, "encoder_out");
  d.num_classes = checked_dim(r, "num_classes");
  d.disc_hidden = checked_dim(r, "disc_hidden");
  return d;
}

void write_parameters(io::ByteWriter& w, const AclModel& model) {
  for (const auto& [name, value] : model.named_tensors()) write_matrix(w, *value);
}

AclModel read_parameters(io::ByteReader& r, const ModelDims& d) {
  const std::uint64_t f = d.feature_dim, h = d.encoder_hidden, e = d.encoder_out,
                      c = d.num_classes, dh = d.disc_hidden;
  // Each tensor also carries an 8-byte shape prefix.
  const std::uint64_t values = (f * h + h) + (h * e + e) + (e * c + c) +
                               2 * ((e * dh + dh) + (dh + 1)) + 2 * (e * e + e);
  r.section("parameters");
  r.require(values + 18, 8);
  AclModel model(d);
  for (auto& p : model.all_params()) {
    r.section("parameters/" + p.name);
    *p.value = read_matrix(r, p.value->rows(), p.value->cols());
  }
  return model;
}

void write_class_weights(io::ByteWriter& w, const ClassWeightVector& cw) {
  w.u32(static_cast<std::uint32_t>(cw.raw.size()));
  w.f64(cw.threshold);
  w.u64(cw.updated_at_iteration);
  w.u32(cw.fallback ? 1 : 0);
  for (double v : cw.raw) w.f64(v);
  for (double v : cw.active) w.f64(v);
}

ClassWeightVector read_class_weights(io::ByteReader& r, std::size_t expected_classes) {
  r.section("class weights");
  const std::uint32_t n = r.u32();
  if (n != expected_classes) {
    throw FormatError(
        fmt::format("class weights: {} entries, model has {} classes", n, expected_classes));
  }
  ClassWeightVector cw;
  cw.threshold = r.f64();
  cw.updated_at_iteration = r.u64();
  cw.fallback = r.u32() != 0;
  r.require(2ull * n, 8);
  cw.raw.resize(n);
  cw.active.resize(n);
  for (auto& v : cw.raw) v = r.f64();
  for (auto& v : cw.active) v = r.f64();
  return cw;
}

std::string serialize_model(const AclModel& model, const TrainConfig& config,
                            const ClassWeightVector* class_weights) {
  io::ByteWriter w;
  w.magic(kModelMagic);
  w.u32(kModelFormatVersion);
  write_dims(w, model.dims());
  write_config(w, config);
  write_parameters(w, model);
  w.u32(class_weights != nullptr ? 1 : 0);
  if (class_weights != nullptr) write_class_weights(w, *class_weights);
  return w.bytes();
}

ModelFile parse_model(std::span<const char> bytes) {
  io::ByteReader r(bytes);
  r.section("header");
  r.expect_magic(kModelMagic);
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError(fmt::format("header: unsupported model format version {} (expected {})",
                                  version, kModelFormatVersion));
  }
  const ModelDims dims = read_dims(r);
  TrainConfig config = read_config(r);
  ModelFile out{read_parameters(r, dims), config, std::nullopt};
  out.model.grl.tau = config.tau;
  r.section("class weights");
  const std::uint32_t present = r.u32();
  if (present > 1) throw FormatError("class weights: bad presence flag");
  if (present == 1) out.class_weights = read_class_weights(r, dims.num_classes);
  r.section("end of file");
  r.expect_end();
  return out;
}

void save_model(const AclModel& model, const std::filesystem::path& path,
                const TrainConfig& config, const ClassWeightVector* class_weights) {
  io::write_file_atomic(path, serialize_model(model, config, class_weights));
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model(io::read_file(path)); }

}  // namespace acl
