#include "acl/config.hpp"

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0) || !(beta >= 0.0) || !(tau >= 0.0)) {
    throw ConfigError(
        fmt::format("gamma, beta and tau must be >= 0 (got {}, {}, {})", gamma, beta, tau));
  }
  if (!(lr > 0.0)) throw ConfigError(fmt::format("lr must be > 0, got {}", lr));
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (iterations == 0) throw ConfigError("iterations must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError(fmt::format("dropout_rate must be in [0, 1), got {}", dropout_rate));
  }
  if (weight_update_interval == 0) throw ConfigError("weight_update_interval must be >= 1");
  if (!(weight_threshold >= 0.0)) {
    throw ConfigError(fmt::format("weight_threshold must be >= 0, got {}", weight_threshold));
  }
  if (encoder_hidden == 0 || disc_hidden == 0 || (encoder_out && *encoder_out == 0)) {
    throw ConfigError("layer widths must be >= 1");
  }
}

const char* to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

const char* to_string(DiscriminatorScaling s) {
  return s == DiscriminatorScaling::gamma_tau ? "gamma_tau" : "gamma";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError(fmt::format("unknown optimizer '{}' (expected adam or sgd)", s));
}

DiscriminatorScaling parse_disc_scaling(const std::string& s) {
  if (s == "gamma_tau") return DiscriminatorScaling::gamma_tau;
  if (s == "gamma") return DiscriminatorScaling::gamma;
  throw ConfigError(
      fmt::format("unknown discriminator scaling '{}' (expected gamma_tau or gamma)", s));
}

}  // namespace acl
