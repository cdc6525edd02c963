#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "acl/config.hpp"

namespace acl::cli {

// Everything `acl train` needs: the training hyperparameters plus file
// locations and run bookkeeping.
struct RunConfig {
  TrainConfig train;

  std::string source_features;
  std::string source_labels;
  std::string target_features;
  std::string target_labels;  // optional, evaluation only
  std::string out_dir = ".";
  // Inferred as max source label + 1 when unset.
  std::optional<std::size_t> num_classes;
  bool csv_header = false;
  // 0 disables progress lines / checkpoints.
  std::size_t progress_every = 100;
  std::size_t checkpoint_every = 0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

// Every key accepted in a config file, in the order the resolved config is
// written. Each key is also accepted as a `--name` flag with '_' spelled '-'.
const std::vector<ConfigKey>& config_keys();

// Sets one key from its textual value. Throws ConfigError for an unknown key
// or an unparsable value.
void apply_key(RunConfig& config, std::string_view key, std::string_view value);

// Current value of a key, formatted so apply_key reads it back unchanged.
std::string key_value(const RunConfig& config, std::string_view key);

// Applies `key = value` lines; '#' starts a comment, blank lines are ignored.
// Errors name the line number.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::string& path);

// One `key = value` line per key, preceded by a comment header.
std::string format_run_config(const RunConfig& config);

}  // namespace acl::cli
