#include "acl/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "acl/binary_io.hpp"
#include "acl/errors.hpp"
#include "acl/model_io.hpp"

namespace acl {

namespace {

constexpr std::string_view kStateMagic = "ACLS";
constexpr std::uint32_t kStateVersion = 1;

constexpr DomainLabeling kLabelings[] = {DomainLabeling::source_zero, DomainLabeling::source_one};

void check_batch(const Batch& b) {
  if (b.source_labels.size() != b.source_features.rows()) {
    throw DimensionError(fmt::format("batch has {} source labels for {} source rows",
                                     b.source_labels.size(), b.source_features.rows()));
  }
}

void check_finite_component(double v, const char* name) {
  if (!std::isfinite(v)) throw NumericError(fmt::format("non-finite {}", name));
}

void finish_report(LossReport& rep, const TrainConfig& cfg) {
  rep.l_adv_total = rep.l_adv_st + rep.l_adv_ts;
  rep.l_total = total_objective(rep.l_source, rep.l_adv_total, rep.l_con, cfg.gamma, cfg.beta);
  check_finite_component(rep.l_source, "l_source");
  check_finite_component(rep.l_adv_st, "l_adv_st");
  check_finite_component(rep.l_adv_ts, "l_adv_ts");
  check_finite_component(rep.l_con, "l_con");
  check_finite_component(rep.l_total, "l_total");
}

std::vector<double> source_sample_weights(const ClassWeightVector* cw, const Batch& b) {
  if (cw == nullptr) return {};
  return per_sample_weights(cw->active, b.source_labels);
}

}  // namespace

LossReport compute_gradients(AclModel& model, const Batch& batch,
                             const ClassWeightVector* class_weights, const TrainConfig& config,
                             GradientMode mode, const PassOptions& pass,
                             const ComponentMask& mask) {
  check_batch(batch);
  model.zero_grad();
  const std::vector<double> sample_w = source_sample_weights(class_weights, batch);
  const std::span<const double> class_w =
      class_weights != nullptr ? std::span<const double>(class_weights->active)
                               : std::span<const double>();

  const EncoderCache enc_s = encode_cached(model, batch.source_features, pass);
  const EncoderCache enc_t = encode_cached(model, batch.target_features, pass);
  const Matrix& z_s = enc_s.output;
  const Matrix& z_t = enc_t.output;
  Matrix dz_s(z_s.rows(), z_s.cols());
  Matrix dz_t(z_t.rows(), z_t.cols());
  LossReport rep;

  const Matrix probs = classify(model, z_s);
  const ClassificationLoss cls = source_classification_loss(probs, batch.source_labels, class_w);
  rep.l_source = cls.value;
  if (mask.source) add_in_place(dz_s, classify_backward(model, z_s, cls.grad_logits));

  // Adversarial path. Discriminator gradients are accumulated unscaled and
  // rescaled once both directions are done; the encoding gradient is routed
  // through the reversal layer in update mode.
  const GradientReversal grl{config.tau};
  Matrix adv_s(z_s.rows(), z_s.cols());
  Matrix adv_t(z_t.rows(), z_t.cols());
  for (DomainLabeling labeling : kLabelings) {
    const bool first = labeling == DomainLabeling::source_zero;
    if (!first && config.single_direction_adversarial) continue;
    const DiscriminatorCache c_s = discriminate_cached(model, z_s, labeling);
    const DiscriminatorCache c_t = discriminate_cached(model, z_t, labeling);
    const AdversarialLoss adv = adversarial_direction_loss(c_s.probs, c_t.probs, labeling, sample_w);
    (first ? rep.l_adv_st : rep.l_adv_ts) = adv.value;
    if (!(first ? mask.adv_st : mask.adv_ts)) continue;
    add_in_place(adv_s, discriminate_backward(model, labeling, c_s, adv.grad_source_logits));
    add_in_place(adv_t, discriminate_backward(model, labeling, c_t, adv.grad_target_logits));
  }
  double disc_scale = config.gamma;
  if (mode == GradientMode::update && config.disc_scaling == DiscriminatorScaling::gamma_tau) {
    disc_scale = config.gamma * config.tau;
  }
  for (auto& p : model.params(ParamGroup::adversarial)) scale_in_place(*p.grad, disc_scale);
  if (mode == GradientMode::update) {
    adv_s = grl.backward(adv_s);
    adv_t = grl.backward(adv_t);
  }
  scale_in_place(adv_s, config.gamma);
  scale_in_place(adv_t, config.gamma);
  add_in_place(dz_s, adv_s);
  add_in_place(dz_t, adv_t);

  if (!config.disable_consistency) {
    const std::span<const double> con_w =
        config.weight_consistency ? std::span<const double>(sample_w) : std::span<const double>();
    const ConsistencyLoss con = consistency_loss(z_s, z_t, model, con_w, pass,
                                                 mask.consistency ? config.beta : 0.0);
    rep.l_con = con.value;
    add_in_place(dz_s, con.grad_z_source);
    add_in_place(dz_t, con.grad_z_target);
  }

  encode_backward(model, enc_s, dz_s);
  encode_backward(model, enc_t, dz_t);
  finish_report(rep, config);
  return rep;
}

LossReport evaluate_losses(const AclModel& model, const Batch& batch,
                           const ClassWeightVector* class_weights, const TrainConfig& config,
                           const PassOptions& pass) {
  check_batch(batch);
  const std::vector<double> sample_w = source_sample_weights(class_weights, batch);
  const std::span<const double> class_w =
      class_weights != nullptr ? std::span<const double>(class_weights->active)
                               : std::span<const double>();
  const Matrix z_s = encode(model, batch.source_features, pass);
  const Matrix z_t = encode(model, batch.target_features, pass);
  LossReport rep;
  rep.l_source = source_classification_loss(classify(model, z_s), batch.source_labels, class_w).value;
  for (DomainLabeling labeling : kLabelings) {
    const bool first = labeling == DomainLabeling::source_zero;
    if (!first && config.single_direction_adversarial) continue;
    const double v = adversarial_direction_loss(discriminate(model, z_s, labeling),
                                                discriminate(model, z_t, labeling), labeling,
                                                sample_w)
                         .value;
    (first ? rep.l_adv_st : rep.l_adv_ts) = v;
  }
  if (!config.disable_consistency) {
    const std::span<const double> con_w =
        config.weight_consistency ? std::span<const double>(sample_w) : std::span<const double>();
    rep.l_con = consistency_loss_value(z_s, z_t, model, con_w, pass);
  }
  finish_report(rep, config);
  return rep;
}

void validate_training_data(const DomainDataset& source, const DomainDataset& target) {
  source.validate();
  target.validate();
  if (source.size() == 0) throw DataError("source domain is empty");
  if (target.size() == 0) throw DataError("target domain is empty");
  if (!source.fully_labeled()) throw DataError("source domain needs a label for every sample");
  if (source.num_classes == 0) throw DataError("source domain has no classes");
  if (source.feature_dim() != target.feature_dim()) {
    throw DataError(fmt::format("feature width differs between domains: source {} vs target {}",
                                source.feature_dim(), target.feature_dim()));
  }
}

TrainState init_train_state(const DomainDataset& source, const DomainDataset& target,
                            const TrainConfig& config) {
  config.validate();
  validate_training_data(source, target);
  ModelDims dims;
  dims.feature_dim = source.feature_dim();
  dims.encoder_hidden = config.encoder_hidden;
  dims.encoder_out = config.encoder_out.value_or(source.num_classes);
  dims.num_classes = source.num_classes;
  dims.disc_hidden = config.disc_hidden;

  TrainState s;
  s.config = config;
  s.rng = RngStream(config.seed);
  s.model = AclModel::initialized(dims, s.rng);
  s.model.grl.tau = config.tau;
  for (std::size_t g = 0; g < s.adam.size(); ++g) {
    s.adam[g] = AdamState::for_params(s.model.params(kAllGroups[g]));
  }
  s.class_weights = ClassWeightVector::uniform(dims.num_classes);
  s.class_weights.threshold = config.weight_threshold;
  return s;
}

std::vector<std::size_t> sample_batch(std::size_t dataset_size, std::size_t batch_size,
                                      RngStream& rng) {
  if (dataset_size == 0) throw DataError("cannot sample a batch from an empty dataset");
  std::vector<std::size_t> out(batch_size);
  if (batch_size > dataset_size) {
    for (auto& i : out) i = rng.below(dataset_size);
    return out;
  }
  std::vector<std::size_t> pool(dataset_size);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + rng.below(dataset_size - i);
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  return out;
}

LossReport train_step(TrainState& state, const Batch& batch, const ComponentMask& mask) {
  const TrainConfig& cfg = state.config;
  const ClassWeightVector* cw = cfg.disable_weighting ? nullptr : &state.class_weights;
  const PassOptions pass{true, cfg.dropout_rate, &state.rng};
  LossReport rep;
  try {
    rep = compute_gradients(state.model, batch, cw, cfg, GradientMode::update, pass, mask);
    for (std::size_t g = 0; g < state.adam.size(); ++g) {
      const ParamGroup group = kAllGroups[g];
      if (group == ParamGroup::consistency && cfg.disable_consistency) continue;
      const auto params = state.model.params(group);
      if (cfg.optimizer == OptimizerKind::adam) {
        adam_step(params, state.adam[g], cfg.lr, group_name(group));
      } else {
        sgd_step(params, cfg.lr, group_name(group));
      }
    }
  } catch (const NumericError& e) {
    throw NumericError(fmt::format("iteration {}: {}", state.iteration, e.what()));
  }
  rep.iteration = state.iteration;
  rep.active_classes = cw != nullptr ? cw->kept_count() : state.model.dims().num_classes;
  state.history.push_back(rep);
  ++state.iteration;
  return rep;
}

void run_training(TrainState& state, const DomainDataset& source, const DomainDataset& target,
                  std::size_t until_iteration, const ProgressFn& progress) {
  const TrainConfig& cfg = state.config;
  validate_training_data(source, target);
  if (source.feature_dim() != state.model.dims().feature_dim) {
    throw DataError(fmt::format("model expects {} features, data has {}",
                                state.model.dims().feature_dim, source.feature_dim()));
  }
  if (source.num_classes != state.model.dims().num_classes) {
    throw DataError(fmt::format("model has {} classes, source declares {}",
                                state.model.dims().num_classes, source.num_classes));
  }
  while (state.iteration < until_iteration) {
    if (!cfg.disable_weighting && weight_update_due(state.iteration, cfg.weight_update_interval)) {
      state.class_weights = estimate_class_weights(state.model, target.features,
                                                   cfg.weight_threshold, cfg.normalize_weights);
      state.class_weights.updated_at_iteration = state.iteration;
    }
    const auto src_idx = sample_batch(source.size(), cfg.batch_size, state.rng);
    const auto tgt_idx = sample_batch(target.size(), cfg.batch_size, state.rng);
    Batch batch{gather_rows(source.features, src_idx), {}, gather_rows(target.features, tgt_idx)};
    batch.source_labels.reserve(src_idx.size());
    for (std::size_t i : src_idx) batch.source_labels.push_back(source.labels[i]);
    const LossReport rep = train_step(state, batch);
    if (progress) progress(rep);
  }
}

ClassWeightVector final_class_weights(const TrainState& state, const DomainDataset& target) {
  const TrainConfig& cfg = state.config;
  if (cfg.disable_weighting) {
    ClassWeightVector w = ClassWeightVector::uniform(state.model.dims().num_classes);
    w.threshold = cfg.weight_threshold;
    w.updated_at_iteration = state.iteration;
    return w;
  }
  ClassWeightVector w = estimate_class_weights(state.model, target.features, cfg.weight_threshold,
                                               cfg.normalize_weights);
  w.updated_at_iteration = state.iteration;
  return w;
}

TrainResult train(const DomainDataset& source, const DomainDataset& target,
                  const TrainConfig& config, const ProgressFn& progress) {
  TrainState state = init_train_state(source, target, config);
  run_training(state, source, target, config.iterations, progress);
  ClassWeightVector weights = final_class_weights(state, target);
  return {std::move(state.model), std::move(state.history), std::move(weights)};
}

std::string serialize_train_state(const TrainState& s) {
  io::ByteWriter w;
  w.magic(kStateMagic);
  w.u32(kStateVersion);
  write_config(w, s.config);
  write_dims(w, s.model.dims());
  write_parameters(w, s.model);
  for (const AdamState& a : s.adam) {
    w.f64(a.beta1);
    w.f64(a.beta2);
    w.f64(a.epsilon);
    w.u64(a.step);
    w.u32(static_cast<std::uint32_t>(a.first_moment.size()));
    for (std::size_t i = 0; i < a.first_moment.size(); ++i) {
      write_matrix(w, a.first_moment[i]);
      write_matrix(w, a.second_moment[i]);
    }
  }
  write_class_weights(w, s.class_weights);
  w.u64(s.iteration);
  w.u64(s.rng.seed());
  w.u64(s.rng.counter());
  w.u64(s.history.size());
  for (const LossReport& r : s.history) {
    w.u64(r.iteration);
    w.f64(r.l_source);
    w.f64(r.l_adv_st);
    w.f64(r.l_adv_ts);
    w.f64(r.l_adv_total);
    w.f64(r.l_con);
    w.f64(r.l_total);
    w.u64(r.active_classes);
  }
  return w.bytes();
}

TrainState parse_train_state(std::span<const char> bytes) {
  io::ByteReader r(bytes);
  r.section("header");
  r.expect_magic(kStateMagic);
  const std::uint32_t version = r.u32();
  if (version != kStateVersion) {
    throw FormatError(fmt::format("header: unsupported training state version {} (expected {})",
                                  version, kStateVersion));
  }
  TrainState s;
  s.config = read_config(r);
  const ModelDims dims = read_dims(r);
  s.model = read_parameters(r, dims);
  s.model.grl.tau = s.config.tau;
  for (std::size_t g = 0; g < s.adam.size(); ++g) {
    r.section(fmt::format("optimizer/{}", group_name(kAllGroups[g])));
    AdamState& a = s.adam[g];
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.epsilon = r.f64();
    a.step = r.u64();
    const auto params = s.model.params(kAllGroups[g]);
    const std::uint32_t n = r.u32();
    if (n != params.size()) {
      throw FormatError(fmt::format("{}: {} tensors, expected {}", r.section(), n, params.size()));
    }
    for (const auto& p : params) {
      a.first_moment.push_back(read_matrix(r, p.value->rows(), p.value->cols()));
      a.second_moment.push_back(read_matrix(r, p.value->rows(), p.value->cols()));
    }
  }
  s.class_weights = read_class_weights(r, dims.num_classes);
  r.section("progress");
  s.iteration = r.u64();
  const std::uint64_t seed = r.u64();
  const std::uint64_t counter = r.u64();
  s.rng = RngStream(seed, counter);
  r.section("history");
  const std::uint64_t n = r.u64();
  if (n != s.iteration) {
    throw FormatError(
        fmt::format("history: {} entries but the state is at iteration {}", n, s.iteration));
  }
  r.require(n, 8 * 8);
  s.history.resize(n);
  for (LossReport& rep : s.history) {
    rep.iteration = r.u64();
    rep.l_source = r.f64();
    rep.l_adv_st = r.f64();
    rep.l_adv_ts = r.f64();
    rep.l_adv_total = r.f64();
    rep.l_con = r.f64();
    rep.l_total = r.f64();
    rep.active_classes = r.u64();
  }
  r.section("end of file");
  r.expect_end();
  return s;
}

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_train_state(state));
}

TrainState load_train_state(const std::filesystem::path& path) {
  return parse_train_state(io::read_file(path));
}

}  // namespace acl
