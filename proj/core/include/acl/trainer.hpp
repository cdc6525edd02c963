#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "acl/config.hpp"
#include "acl/data.hpp"
#include "acl/losses.hpp"
#include "acl/model.hpp"
#include "acl/optim.hpp"
#include "acl/rng.hpp"
#include "acl/weighting.hpp"

namespace acl {

// One source batch (with labels) and one target batch.
struct Batch {
  Matrix source_features;
  std::vector<int> source_labels;
  Matrix target_features;
};

// Selects which loss components contribute gradients. Loss values are
// reported regardless.
struct ComponentMask {
  bool source = true;
  bool adv_st = true;
  bool adv_ts = true;
  bool consistency = true;
};

enum class GradientMode {
  // Exact gradient of L_S + gamma * L_A + beta * L_Con wrt every parameter.
  objective,
  // Training update directions: the encoder receives the adversarial
  // gradient through the reversal layer (times -tau) and the
  // discriminators receive it scaled per TrainConfig::disc_scaling.
  update,
};

// Runs forward and backward over `batch`, overwriting the model's
// gradients. `class_weights` may be null (unweighted).
LossReport compute_gradients(AclModel& model, const Batch& batch,
                             const ClassWeightVector* class_weights, const TrainConfig& config,
                             GradientMode mode, const PassOptions& pass,
                             const ComponentMask& mask = {});

// Forward-only loss values.
LossReport evaluate_losses(const AclModel& model, const Batch& batch,
                           const ClassWeightVector* class_weights, const TrainConfig& config,
                           const PassOptions& pass = {});

struct TrainState {
  TrainConfig config;
  AclModel model;
  std::array<AdamState, 4> adam;  // indexed like kAllGroups
  ClassWeightVector class_weights;
  std::size_t iteration = 0;
  std::vector<LossReport> history;
  RngStream rng;
};

// Fresh state: Glorot-initialized model drawn from `config.seed`, all-ones
// class weights.
TrainState init_train_state(const DomainDataset& source, const DomainDataset& target,
                            const TrainConfig& config);

// Uniform batch indices: without replacement when batch_size <= n, with
// replacement otherwise.
std::vector<std::size_t> sample_batch(std::size_t dataset_size, std::size_t batch_size,
                                      RngStream& rng);

// One optimizer iteration on a given batch. Appends to the history.
LossReport train_step(TrainState& state, const Batch& batch, const ComponentMask& mask = {});

using ProgressFn = std::function<void(const LossReport&)>;

// Re-estimates class weights on schedule, samples batches and steps until
// `state.iteration == until_iteration`.
void run_training(TrainState& state, const DomainDataset& source, const DomainDataset& target,
                  std::size_t until_iteration, const ProgressFn& progress = {});

struct TrainResult {
  AclModel model;
  std::vector<LossReport> history;
  ClassWeightVector class_weights;  // estimated on the final model
};

TrainResult train(const DomainDataset& source, const DomainDataset& target,
                  const TrainConfig& config, const ProgressFn& progress = {});

// Class weights re-estimated on the current model (all ones when weighting
// is disabled).
ClassWeightVector final_class_weights(const TrainState& state, const DomainDataset& target);

// Checkpoint of the full training state: "ACLS", u32 version, config,
// dims, parameters, Adam moments, class weights, rng, history.
std::string serialize_train_state(const TrainState& state);
TrainState parse_train_state(std::span<const char> bytes);
void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

// Checks both datasets against the config and each other.
void validate_training_data(const DomainDataset& source, const DomainDataset& target);

}  // namespace acl
