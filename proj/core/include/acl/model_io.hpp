#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "acl/binary_io.hpp"
#include "acl/config.hpp"
#include "acl/model.hpp"
#include "acl/weighting.hpp"

namespace acl {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Contents of a model file.
//
// Layout (all integers and reals little-endian):
//   "ACLM", u32 version
//   dims:            u32 feature_dim, encoder_hidden, encoder_out, num_classes, disc_hidden
//   hyperparameters: see write_config()
//   parameters:      per tensor in AclModel::all_params() order:
//                    u32 rows, u32 cols, rows*cols f64
//   class weights:   u32 present; if 1: u32 n, f64 threshold, u64 iteration,
//                    u32 fallback, n f64 raw, n f64 active
struct ModelFile {
  AclModel model;
  TrainConfig config;
  std::optional<ClassWeightVector> class_weights;
};

std::string serialize_model(const AclModel& model, const TrainConfig& config,
                            const ClassWeightVector* class_weights = nullptr);
// Throws FormatError naming the damaged section; never returns a partial model.
ModelFile parse_model(std::span<const char> bytes);

void save_model(const AclModel& model, const std::filesystem::path& path,
                const TrainConfig& config = {}, const ClassWeightVector* class_weights = nullptr);
ModelFile load_model(const std::filesystem::path& path);

// Building blocks shared with the training-state checkpoint.
void write_config(io::ByteWriter& w, const TrainConfig& config);
TrainConfig read_config(io::ByteReader& r);
void write_dims(io::ByteWriter& w, const ModelDims& dims);
ModelDims read_dims(io::ByteReader& r);
void write_parameters(io::ByteWriter& w, const AclModel& model);
// Verifies the whole parameter payload is present before allocating.
AclModel read_parameters(io::ByteReader& r, const ModelDims& dims);
void write_class_weights(io::ByteWriter& w, const ClassWeightVector& weights);
ClassWeightVector read_class_weights(io::ByteReader& r, std::size_t expected_classes);
void write_matrix(io::ByteWriter& w, const Matrix& m);
// Reads a matrix whose shape must equal rows x cols.
Matrix read_matrix(io::ByteReader& r, std::size_t rows, std::size_t cols);

}  // namespace acl
