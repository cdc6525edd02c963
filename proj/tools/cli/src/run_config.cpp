#include "acl/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("{}: expected a real number, got '{}'", key, v));
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  ConfigKey key;
  void (*set)(RunConfig&, std::string_view);
  std::string (*get)(const RunConfig&);
};

#define ACL_REAL(field, path, help)                                                   \
  Entry {                                                                             \
    {#field, help}, [](RunConfig& c, std::string_view v) { c.path = parse_real(#field, v); }, \
        [](const RunConfig& c) { return fmt::format("{}", c.path); }                  \
  }
#define ACL_COUNT(field, path, help)                                                   \
  Entry {                                                                              \
    {#field, help}, [](RunConfig& c, std::string_view v) { c.path = parse_count(#field, v); }, \
        [](const RunConfig& c) { return fmt::format("{}", c.path); }                   \
  }
#define ACL_BOOL(field, path, help)                                                   \
  Entry {                                                                             \
    {#field, help}, [](RunConfig& c, std::string_view v) { c.path = parse_bool(#field, v); }, \
        [](const RunConfig& c) { return fmt_bool(c.path); }                           \
  }
#define ACL_PATH(field, help)                                                         \
  Entry {                                                                             \
    {#field, help}, [](RunConfig& c, std::string_view v) { c.field = std::string(v); }, \
        [](const RunConfig& c) { return c.field; }                                    \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      ACL_PATH(source_features, "source feature file (.csv or binary)"),
      ACL_PATH(source_labels, "source label file (text or binary)"),
      ACL_PATH(target_features, "target feature file (.csv or binary)"),
      ACL_PATH(target_labels, "optional target labels, used only for reporting"),
      ACL_PATH(out_dir, "directory receiving model, history and resolved config"),
      Entry{{"num_classes", "number of source classes; empty infers max label + 1"},
            [](RunConfig& c, std::string_view v) {
              if (v.empty()) {
                c.num_classes.reset();
              } else {
                c.num_classes = parse_count("num_classes", v);
              }
            },
            [](const RunConfig& c) {
              return c.num_classes ? fmt::format("{}", *c.num_classes) : std::string();
            }},
      ACL_BOOL(csv_header, csv_header, "CSV feature files start with a header row"),
      ACL_COUNT(progress_every, progress_every, "iterations between progress lines (0 = off)"),
      ACL_COUNT(checkpoint_every, checkpoint_every,
                "iterations between training-state checkpoints (0 = off)"),
      ACL_REAL(gamma, train.gamma, "weight of the adversarial loss"),
      ACL_REAL(beta, train.beta, "weight of the consistency loss"),
      ACL_REAL(tau, train.tau, "gradient reversal factor"),
      ACL_REAL(lr, train.lr, "learning rate"),
      ACL_COUNT(batch_size, train.batch_size, "samples per domain per iteration"),
      ACL_COUNT(iterations, train.iterations, "number of training iterations"),
      ACL_REAL(dropout_rate, train.dropout_rate, "dropout rate in [0, 1)"),
      ACL_COUNT(weight_update_interval, train.weight_update_interval,
                "iterations between class-weight estimates"),
      ACL_REAL(weight_threshold, train.weight_threshold,
               "class weights with a smaller raw value are set to 0"),
      ACL_BOOL(normalize_weights, train.normalize_weights,
               "divide surviving class weights by the largest one"),
      ACL_BOOL(weight_consistency, train.weight_consistency,
               "apply class weights to the source consistency term"),
      Entry{{"seed", "random seed for initialization, batches and dropout"},
            [](RunConfig& c, std::string_view v) { c.train.seed = parse_u64("seed", v); },
            [](const RunConfig& c) { return fmt::format("{}", c.train.seed); }},
      Entry{{"optimizer", "adam or sgd"},
            [](RunConfig& c, std::string_view v) {
              c.train.optimizer = parse_optimizer(std::string(v));
            },
            [](const RunConfig& c) { return std::string(to_string(c.train.optimizer)); }},
      Entry{{"disc_scaling", "discriminator gradient scale: gamma_tau or gamma"},
            [](RunConfig& c, std::string_view v) {
              c.train.disc_scaling = parse_disc_scaling(std::string(v));
            },
            [](const RunConfig& c) { return std::string(to_string(c.train.disc_scaling)); }},
      ACL_BOOL(disable_weighting, train.disable_weighting, "train with all class weights at 1"),
      ACL_BOOL(disable_consistency, train.disable_consistency, "drop the consistency loss"),
      ACL_BOOL(single_direction_adversarial, train.single_direction_adversarial,
               "use only the first discriminator"),
      ACL_COUNT(encoder_hidden, train.encoder_hidden, "encoder hidden width"),
      Entry{{"encoder_out", "encoding width; empty uses the number of classes"},
            [](RunConfig& c, std::string_view v) {
              if (v.empty()) {
                c.train.encoder_out.reset();
              } else {
                c.train.encoder_out = parse_count("encoder_out", v);
              }
            },
            [](const RunConfig& c) {
              return c.train.encoder_out ? fmt::format("{}", *c.train.encoder_out)
                                         : std::string();
            }},
      ACL_COUNT(disc_hidden, train.disc_hidden, "discriminator hidden width"),
  };
  return table;
}

#undef ACL_REAL
#undef ACL_COUNT
#undef ACL_BOOL
#undef ACL_PATH

const Entry& find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void apply_key(RunConfig& config, std::string_view key, std::string_view value) {
  find_entry(key).set(config, trim(value));
}

std::string key_value(const RunConfig& config, std::string_view key) {
  return find_entry(key).get(config);
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    try {
      apply_key(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

std::string format_run_config(const RunConfig& config) {
  std::string out = "# resolved acl train configuration\n";
  for (const auto& e : entries()) {
    out += fmt::format("{} = {}\n", e.key.name, e.get(config));
  }
  return out;
}

}  // namespace acl::cli
