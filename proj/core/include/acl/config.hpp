#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace acl {

enum class OptimizerKind { adam, sgd };

// How the discriminators' own gradient is scaled: by gamma * tau (the
// default) or by gamma alone.
enum class DiscriminatorScaling { gamma_tau, gamma };

struct TrainConfig {
  double gamma = 0.5;  // weight of the adversarial loss
  double beta = 0.5;   // weight of the consistency loss
  double tau = 0.31;   // gradient reversal factor
  double lr = 1e-4;
  std::size_t batch_size = 128;
  std::size_t iterations = 1000;
  double dropout_rate = 0.5;
  std::size_t weight_update_interval = 50;
  double weight_threshold = 1e-9;
  // Max-normalize surviving class weights; off uses the raw mean probabilities.
  bool normalize_weights = true;
  // Apply class weights to the source term of the consistency loss.
  bool weight_consistency = true;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  DiscriminatorScaling disc_scaling = DiscriminatorScaling::gamma_tau;

  bool disable_weighting = false;
  bool disable_consistency = false;
  bool single_direction_adversarial = false;

  std::size_t encoder_hidden = 1000;
  // Defaults to the number of source classes.
  std::optional<std::size_t> encoder_out;
  std::size_t disc_hidden = 256;

  // Throws ConfigError on an out-of-range field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

const char* to_string(OptimizerKind k);
const char* to_string(DiscriminatorScaling s);
OptimizerKind parse_optimizer(const std::string& s);
DiscriminatorScaling parse_disc_scaling(const std::string& s);

}  // namespace acl
