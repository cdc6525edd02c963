#include "acl/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "acl/binary_io.hpp"
#include "acl/cli/run_config.hpp"
#include "acl/data.hpp"
#include "acl/errors.hpp"
#include "acl/eval.hpp"
#include "acl/model_io.hpp"
#include "acl/trainer.hpp"
#include "acl/weighting.hpp"

namespace acl::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kModelFile = "model.aclm";
constexpr const char* kHistoryFile = "history.csv";
constexpr const char* kResolvedConfigFile = "config.resolved";
constexpr const char* kCheckpointFile = "checkpoint.acls";

std::string flag_name(std::string_view key) {
  std::string s = "--";
  for (char c : key) s += c == '_' ? '-' : c;
  return s;
}

std::vector<int> load_required_labels(const std::string& path, std::string_view what) {
  if (path.empty()) throw UsageError(fmt::format("{} labels are required", what));
  return load_labels(path);
}

Matrix load_required_features(const std::string& path, std::string_view what, bool header) {
  if (path.empty()) throw UsageError(fmt::format("{} features are required", what));
  return load_features(path, CsvOptions{header});
}

std::size_t infer_num_classes(const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  if (max_label < 0) throw DataError("source labels contain no known class");
  return static_cast<std::size_t>(max_label) + 1;
}

std::string format_history(const std::vector<LossReport>& history) {
  std::string out = "iteration,l_source,l_adv_st,l_adv_ts,l_adv_total,l_con,l_total,active_classes\n";
  for (const auto& r : history) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.iteration, r.l_source, r.l_adv_st,
                       r.l_adv_ts, r.l_adv_total, r.l_con, r.l_total, r.active_classes);
  }
  return out;
}

std::string format_progress(const LossReport& r) {
  return fmt::format(
      "iter {} l_source={:.6f} l_adv={:.6f} l_con={:.6f} l_total={:.6f} active_classes={}\n",
      r.iteration + 1, r.l_source, r.l_adv_total, r.l_con, r.l_total, r.active_classes);
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config_file;
  std::string resume;
  bool no_weighting = false;
  bool no_consistency = false;
  bool single_direction = false;
  bool quiet = false;
  std::vector<std::string> key_values;  // parallel to config_keys()
};

int cmd_train(CLI::App& cmd, const TrainArgs& args, std::ostream& out) {
  RunConfig rc;
  if (!args.config_file.empty()) apply_config_file(rc, args.config_file);
  const auto& keys = config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (cmd.count(flag_name(keys[i].name)) > 0) apply_key(rc, keys[i].name, args.key_values[i]);
  }
  if (args.no_weighting) rc.train.disable_weighting = true;
  if (args.no_consistency) rc.train.disable_consistency = true;
  if (args.single_direction) rc.train.single_direction_adversarial = true;

  std::optional<TrainState> resumed;
  if (!args.resume.empty()) {
    resumed = load_train_state(args.resume);
    // The checkpoint's hyperparameters win; only the stopping point may move.
    const std::size_t iterations = rc.train.iterations;
    rc.train = resumed->config;
    rc.train.iterations = iterations;
    if (iterations < resumed->iteration) {
      throw ConfigError(fmt::format("iterations {} is before the checkpoint's iteration {}",
                                    iterations, resumed->iteration));
    }
  }
  rc.train.validate();

  Matrix src_x = load_required_features(rc.source_features, "source", rc.csv_header);
  std::vector<int> src_y = load_required_labels(rc.source_labels, "source");
  Matrix tgt_x = load_required_features(rc.target_features, "target", rc.csv_header);
  std::vector<int> tgt_y;
  if (!rc.target_labels.empty()) tgt_y = load_labels(rc.target_labels);
  const std::size_t classes = rc.num_classes ? *rc.num_classes : infer_num_classes(src_y);
  DomainDataset source = make_dataset(std::move(src_x), std::move(src_y), classes, "source");
  DomainDataset target = make_dataset(std::move(tgt_x), std::move(tgt_y), classes, "target");
  validate_training_data(source, target);

  TrainState state = resumed ? std::move(*resumed) : init_train_state(source, target, rc.train);
  state.config.iterations = rc.train.iterations;

  const fs::path dir = rc.out_dir;
  fs::create_directories(dir);
  io::write_file_atomic(dir / kResolvedConfigFile, format_run_config(rc));

  ProgressFn progress;
  if (!args.quiet && rc.progress_every > 0) {
    progress = [&](const LossReport& r) {
      if ((r.iteration + 1) % rc.progress_every == 0) out << format_progress(r) << std::flush;
    };
  }
  while (state.iteration < rc.train.iterations) {
    std::size_t stop = rc.train.iterations;
    if (rc.checkpoint_every > 0) {
      stop = std::min(stop, (state.iteration / rc.checkpoint_every + 1) * rc.checkpoint_every);
    }
    run_training(state, source, target, stop, progress);
    if (rc.checkpoint_every > 0 && stop % rc.checkpoint_every == 0) {
      save_train_state(state, dir / kCheckpointFile);
    }
  }

  const ClassWeightVector weights = final_class_weights(state, target);
  save_model(state.model, dir / kModelFile, state.config, &weights);
  io::write_file_atomic(dir / kHistoryFile, format_history(state.history));

  if (!args.quiet) {
    out << fmt::format("wrote {} {} {}\n", (dir / kModelFile).string(),
                       (dir / kHistoryFile).string(), (dir / kResolvedConfigFile).string());
    out << fmt::format("active classes {} of {}\n", weights.kept_count(), weights.size());
    if (target.fully_labeled()) {
      PredictionSet pred = predict(state.model, target.features);
      pred.labels = target.labels;
      out << fmt::format("target accuracy {:.4f}\n", accuracy(pred));
    }
  }
  return kExitOk;
}

// ---- eval / predict --------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string features;
  std::string labels;
  std::string source_features;
  std::string source_labels;
  std::string predictions_out;
  std::size_t top_k = 1;
  bool mask_weights = false;
  bool csv_header = false;
};

const ClassWeightVector* mask_for(const ModelFile& mf, bool enabled) {
  if (!enabled) return nullptr;
  if (!mf.class_weights) throw UsageError("model file stores no class weights to mask with");
  return &*mf.class_weights;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  if (args.labels.empty()) throw UsageError("eval needs --labels");
  const ModelFile mf = load_model(args.model);
  const Matrix x = load_required_features(args.features, "evaluation", args.csv_header);
  std::vector<int> y = load_labels(args.labels);
  if (y.size() != x.rows()) {
    throw DataError(fmt::format("{} labels for {} feature rows", y.size(), x.rows()));
  }
  PredictOptions popt;
  popt.mask_weights = mask_for(mf, args.mask_weights);
  PredictionSet pred = predict(mf.model, x, popt);
  pred.labels = y;
  out << fmt::format("samples {}\naccuracy {:.6f}\nmrr {:.6f}\n", pred.size(), accuracy(pred),
                     mean_reciprocal_rank(pred));
  if (!args.source_features.empty()) {
    const Matrix sx = load_features(args.source_features, CsvOptions{args.csv_header});
    std::vector<int> sy;
    if (!args.source_labels.empty()) sy = load_labels(args.source_labels);
    DiagnosticsOptions dopt;
    dopt.source_labels = sy;
    dopt.target_labels = y;
    out << format_diagnostics(domain_diagnostics(mf.model, sx, x, dopt));
  }
  if (!args.predictions_out.empty()) export_predictions(pred, args.predictions_out, args.top_k);
  return kExitOk;
}

int cmd_predict(const EvalArgs& args, std::ostream& out) {
  if (args.predictions_out.empty()) throw UsageError("predict needs --out");
  const ModelFile mf = load_model(args.model);
  const Matrix x = load_required_features(args.features, "input", args.csv_header);
  PredictOptions popt;
  popt.mask_weights = mask_for(mf, args.mask_weights);
  const PredictionSet pred = predict(mf.model, x, popt);
  export_predictions(pred, args.predictions_out, args.top_k);
  out << fmt::format("wrote {} rows to {}\n", pred.size() * std::min(args.top_k,
                                                                      pred.num_classes()),
                     args.predictions_out);
  return kExitOk;
}

// ---- gen-synth -------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::string out_dir = ".";
  std::string format = "binary";
};

int cmd_gen_synth(const SynthArgs& args, std::ostream& out) {
  if (args.format != "binary" && args.format != "csv") {
    throw UsageError(fmt::format("unknown format '{}' (expected binary or csv)", args.format));
  }
  args.spec.validate();
  const auto [source, target] = generate_synthetic_pda(args.spec);
  const fs::path dir = args.out_dir;
  fs::create_directories(dir);
  const bool csv = args.format == "csv";
  auto write = [&](const DomainDataset& d, const std::string& prefix) {
    if (csv) {
      save_features_csv(d.features, dir / (prefix + "_features.csv"));
      save_labels_text(d.labels, dir / (prefix + "_labels.txt"));
    } else {
      save_features_binary(d.features, dir / (prefix + "_features.aclf"));
      save_labels_binary(d.labels, dir / (prefix + "_labels.acll"));
    }
  };
  write(source, "source");
  write(target, "target");
  out << fmt::format("source {}x{} ({} classes), target {}x{} ({} shared classes) in {}\n",
                     source.size(), source.feature_dim(), args.spec.num_source_classes,
                     target.size(), target.feature_dim(), args.spec.num_shared_classes,
                     dir.string());
  return kExitOk;
}

// ---- inspect-weights -------------------------------------------------------

struct InspectArgs {
  std::string model;
  std::string target_features;
  std::optional<double> threshold;
  bool csv_header = false;
};

int cmd_inspect_weights(const InspectArgs& args, std::ostream& out) {
  const ModelFile mf = load_model(args.model);
  const Matrix x = load_required_features(args.target_features, "target", args.csv_header);
  const double threshold = args.threshold.value_or(mf.config.weight_threshold);
  if (!(threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
  const ClassWeightVector w =
      estimate_class_weights(mf.model, x, threshold, mf.config.normalize_weights);
  out << fmt::format("{:>5}  {:>14}  {:>14}  {}\n", "class", "raw", "active", "status");
  for (std::size_t c = 0; c < w.size(); ++c) {
    out << fmt::format("{:>5}  {:>14.6e}  {:>14.6e}  {}\n", c, w.raw[c], w.active[c],
                       w.active[c] == 0.0 ? "dropped" : "kept");
  }
  out << fmt::format("kept {} dropped {} threshold {}{}\n", w.kept_count(), w.dropped_count(),
                     threshold, w.fallback ? " (fallback: every class below threshold)" : "");
  return kExitOk;
}

std::string single_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

ErrorClass classify_error(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return {kExitUsage, "usage"};
  if (dynamic_cast<const ConfigError*>(&e)) return {kExitUsage, "config"};
  if (dynamic_cast<const FormatError*>(&e)) return {kExitData, "format"};
  if (dynamic_cast<const DataError*>(&e)) return {kExitData, "data"};
  if (dynamic_cast<const DimensionError*>(&e)) return {kExitData, "dimension"};
  if (dynamic_cast<const NumericError*>(&e)) return {kExitNumeric, "numeric"};
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return {kExitData, "io"};
  if (dynamic_cast<const std::bad_alloc*>(&e)) return {kExitData, "memory"};
  return {kExitInternal, "internal"};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial consistent learning for partial domain adaptation", "acl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "acl 0.1.0");

  // train
  TrainArgs targs;
  targs.key_values.resize(config_keys().size());
  CLI::App* train = app.add_subcommand("train", "Train a model; writes model, history and config");
  train->add_option("--config", targs.config_file, "key = value configuration file");
  train->add_option("--resume", targs.resume, "continue from a training-state checkpoint");
  train->add_flag("--no-weighting", targs.no_weighting, "same as --disable-weighting true");
  train->add_flag("--no-consistency", targs.no_consistency, "same as --disable-consistency true");
  train->add_flag("--single-direction", targs.single_direction,
                  "same as --single-direction-adversarial true");
  train->add_flag("--quiet", targs.quiet, "suppress progress and summary lines");
  for (std::size_t i = 0; i < config_keys().size(); ++i) {
    const auto& k = config_keys()[i];
    train->add_option(flag_name(k.name), targs.key_values[i], std::string(k.help));
  }

  // eval
  EvalArgs eargs;
  CLI::App* eval = app.add_subcommand("eval", "Accuracy, MRR and optional domain diagnostics");
  eval->add_option("--model", eargs.model, "model file")->required();
  eval->add_option("--features", eargs.features, "features to evaluate")->required();
  eval->add_option("--labels", eargs.labels, "labels of the evaluated features");
  eval->add_option("--source-features", eargs.source_features,
                   "source features; enables domain diagnostics");
  eval->add_option("--source-labels", eargs.source_labels, "source labels for diagnostics");
  eval->add_option("--predictions-out", eargs.predictions_out, "also write a prediction CSV");
  eval->add_option("--top-k", eargs.top_k, "rows per sample in the prediction CSV")
      ->check(CLI::PositiveNumber);
  eval->add_flag("--mask-weights", eargs.mask_weights, "drop classes whose stored weight is 0");
  eval->add_flag("--csv-header", eargs.csv_header, "CSV feature files have a header row");

  // predict
  EvalArgs pargs;
  CLI::App* pred = app.add_subcommand("predict", "Write ranked class predictions as CSV");
  pred->add_option("--model", pargs.model, "model file")->required();
  pred->add_option("--features", pargs.features, "input features")->required();
  pred->add_option("--out", pargs.predictions_out, "output CSV")->required();
  pred->add_option("--top-k", pargs.top_k, "rows per sample")->check(CLI::PositiveNumber);
  pred->add_flag("--mask-weights", pargs.mask_weights, "drop classes whose stored weight is 0");
  pred->add_flag("--csv-header", pargs.csv_header, "CSV feature files have a header row");

  // gen-synth
  SynthArgs sargs;
  CLI::App* synth = app.add_subcommand("gen-synth", "Generate a synthetic partial DA problem");
  synth->add_option("--out-dir", sargs.out_dir, "output directory");
  synth->add_option("--format", sargs.format, "binary or csv");
  synth->add_option("--source-classes", sargs.spec.num_source_classes, "number of source classes");
  synth->add_option("--shared-classes", sargs.spec.num_shared_classes,
                    "classes also present in the target");
  synth->add_option("--feature-dim", sargs.spec.feature_dim, "feature width");
  synth->add_option("--source-per-class", sargs.spec.samples_per_class_source,
                    "source samples per class");
  synth->add_option("--target-per-class", sargs.spec.samples_per_class_target,
                    "target samples per shared class");
  synth->add_option("--separation", sargs.spec.class_separation, "norm of each class mean");
  synth->add_option("--shift", sargs.spec.shift_magnitude, "norm of the target displacement");
  synth->add_option("--noise", sargs.spec.noise_sigma, "per-coordinate noise deviation");
  synth->add_option("--seed", sargs.spec.seed, "generator seed");

  // inspect-weights
  InspectArgs iargs;
  CLI::App* inspect =
      app.add_subcommand("inspect-weights", "Print the class weight table on target features");
  inspect->add_option("--model", iargs.model, "model file")->required();
  inspect->add_option("--target-features", iargs.target_features, "target features")
      ->required();
  inspect->add_option("--threshold", iargs.threshold, "override the stored weight threshold");
  inspect->add_flag("--csv-header", iargs.csv_header, "CSV feature files have a header row");

  std::vector<const char*> argv{"acl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "acl: error: usage: " << single_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(*train, targs, out);
    if (*eval) return cmd_eval(eargs, out);
    if (*pred) return cmd_predict(pargs, out);
    if (*synth) return cmd_gen_synth(sargs, out);
    if (*inspect) return cmd_inspect_weights(iargs, out);
  } catch (const std::exception& e) {
    const ErrorClass c = classify_error(e);
    err << "acl: error: " << c.kind << ": " << single_line(e.what()) << '\n';
    return c.exit_code;
  }
  return kExitUsage;
}

}  // namespace acl::cli
