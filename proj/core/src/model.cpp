#include "acl/model.hpp"

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

void ModelDims::validate() const {
  if (feature_dim == 0 || encoder_hidden == 0 || encoder_out == 0 || num_classes == 0 ||
      disc_hidden == 0) {
    throw ConfigError(fmt::format(
        "model dims must be positive (feature {}, hidden {}, encoding {}, classes {}, disc {})",
        feature_dim, encoder_hidden, encoder_out, num_classes, disc_hidden));
  }
}

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::classifier: return "classifier";
    case ParamGroup::adversarial: return "adversarial";
    case ParamGroup::consistency: return "consistency";
  }
  return "unknown";
}

Matrix GradientReversal::backward(const Matrix& upstream) const { return scaled(upstream, -tau); }

AclModel::AclModel(const ModelDims& dims) : dims_(dims) {
  dims.validate();
  encoder.dense1 = DenseLayer(dims.feature_dim, dims.encoder_hidden);
  encoder.dense2 = DenseLayer(dims.encoder_hidden, dims.encoder_out);
  classifier.dense = DenseLayer(dims.encoder_out, dims.num_classes);
  for (Discriminator* d : {&disc1, &disc2}) {
    d->hidden = DenseLayer(dims.encoder_out, dims.disc_hidden);
    d->output = DenseLayer(dims.disc_hidden, 1);
  }
  head_st.dense = DenseLayer(dims.encoder_out, dims.encoder_out);
  head_ts.dense = DenseLayer(dims.encoder_out, dims.encoder_out);
}

AclModel AclModel::initialized(const ModelDims& dims, RngStream& rng) {
  AclModel m(dims);
  m.encoder.dense1.init_glorot(rng);
  m.encoder.dense2.init_glorot(rng);
  m.classifier.dense.init_glorot(rng);
  m.disc1.hidden.init_glorot(rng);
  m.disc1.output.init_glorot(rng);
  m.disc2.hidden.init_glorot(rng);
  m.disc2.output.init_glorot(rng);
  m.head_st.dense.init_glorot(rng);
  m.head_ts.dense.init_glorot(rng);
  return m;
}

namespace {
void append_layer(std::vector<ParamRef>& out, const std::string& prefix, DenseLayer& layer) {
  out.push_back({prefix + ".weights", &layer.weights(), &layer.grad_weights()});
  out.push_back({prefix + ".bias", &layer.bias(), &layer.grad_bias()});
}
}  // namespace

std::vector<ParamRef> AclModel::params(ParamGroup group) {
  std::vector<ParamRef> out;
  switch (group) {
    case ParamGroup::encoder:
      append_layer(out, "encoder.dense1", encoder.dense1);
      append_layer(out, "encoder.dense2", encoder.dense2);
      break;
    case ParamGroup::classifier:
      append_layer(out, "classifier.dense", classifier.dense);
      break;
    case ParamGroup::adversarial:
      append_layer(out, "disc1.hidden", disc1.hidden);
      append_layer(out, "disc1.output", disc1.output);
      append_layer(out, "disc2.hidden", disc2.hidden);
      append_layer(out, "disc2.output", disc2.output);
      break;
    case ParamGroup::consistency:
      append_layer(out, "head_st.dense", head_st.dense);
      append_layer(out, "head_ts.dense", head_ts.dense);
      break;
  }
  return out;
}

std::vector<ParamRef> AclModel::all_params() {
  std::vector<ParamRef> out;
  for (ParamGroup g : kAllGroups) {
    auto p = params(g);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> AclModel::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (const auto& p : const_cast<AclModel*>(this)->all_params()) {
    out.emplace_back(p.name, p.value);
  }
  return out;
}

std::size_t AclModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, value] : named_tensors()) n += value->size();
  return n;
}

void AclModel::zero_grad() {
  for (auto& p : all_params()) p.grad->fill(0.0);
}

namespace {

RngStream& pass_rng(const PassOptions& pass, RngStream& fallback) {
  if (pass.train_mode && pass.rng == nullptr) {
    throw ConfigError("train-mode forward pass requires an RNG stream");
  }
  return pass.rng != nullptr ? *pass.rng : fallback;
}

void require_cols(const Matrix& x, std::size_t cols, const char* what) {
  if (x.cols() != cols) {
    throw DimensionError(
        fmt::format("{}: input has {} columns, expected {}", what, x.cols(), cols));
  }
}

HeadCache head_forward(const MappingHead& head, const Matrix& z, const PassOptions& pass) {
  RngStream unused;
  HeadCache c;
  c.input = z;
  auto dropped = dropout_forward(relu_forward(z), pass.dropout_rate, pass_rng(pass, unused),
                                 pass.train_mode);
  c.hidden = std::move(dropped.output);
  c.dropout_mask = std::move(dropped.mask);
  c.output = dense_forward(head.dense, c.hidden);
  return c;
}

Matrix head_backward(MappingHead& head, const HeadCache& c, const Matrix& upstream) {
  Matrix d_hidden = dense_backward(head.dense, c.hidden, upstream);
  return relu_backward(c.input, dropout_backward(c.dropout_mask, d_hidden));
}

}  // namespace

EncoderCache encode_cached(const AclModel& model, const Matrix& x, const PassOptions& pass) {
  require_cols(x, model.dims().feature_dim, "encode");
  RngStream unused;
  EncoderCache c;
  c.input = x;
  c.pre_activation = dense_forward(model.encoder.dense1, x);
  auto dropped = dropout_forward(relu_forward(c.pre_activation), pass.dropout_rate,
                                 pass_rng(pass, unused), pass.train_mode);
  c.hidden = std::move(dropped.output);
  c.dropout_mask = std::move(dropped.mask);
  c.output = dense_forward(model.encoder.dense2, c.hidden);
  return c;
}

Matrix encode(const AclModel& model, const Matrix& x, const PassOptions& pass) {
  return encode_cached(model, x, pass).output;
}

void encode_backward(AclModel& model, const EncoderCache& c, const Matrix& upstream) {
  Matrix d_hidden = dense_backward(model.encoder.dense2, c.hidden, upstream);
  Matrix d_pre = relu_backward(c.pre_activation, dropout_backward(c.dropout_mask, d_hidden));
  dense_backward_params(model.encoder.dense1, c.input, d_pre);
}

Matrix classify(const AclModel& model, const Matrix& z) {
  require_cols(z, model.dims().encoder_out, "classify");
  return softmax_rows(dense_forward(model.classifier.dense, z));
}

Matrix classify_backward(AclModel& model, const Matrix& z, const Matrix& grad_logits) {
  return dense_backward(model.classifier.dense, z, grad_logits);
}

DiscriminatorCache discriminate_cached(const AclModel& model, const Matrix& z,
                                       DomainLabeling which) {
  require_cols(z, model.dims().encoder_out, "discriminate");
  const Discriminator& d = model.discriminator(which);
  DiscriminatorCache c;
  c.input = model.grl.forward(z);
  c.pre_activation = dense_forward(d.hidden, c.input);
  c.hidden = relu_forward(c.pre_activation);
  c.probs = sigmoid_clamped(dense_forward(d.output, c.hidden));
  return c;
}

Matrix discriminate(const AclModel& model, const Matrix& z, DomainLabeling which) {
  return discriminate_cached(model, z, which).probs;
}

Matrix discriminate_backward(AclModel& model, DomainLabeling which, const DiscriminatorCache& c,
                             const Matrix& grad_logits) {
  Discriminator& d = model.discriminator(which);
  Matrix d_hidden = dense_backward(d.output, c.hidden, grad_logits);
  return dense_backward(d.hidden, c.input, relu_backward(c.pre_activation, d_hidden));
}

Matrix grl_backward(const GradientReversal& grl, const Matrix& upstream) {
  return grl.backward(upstream);
}

RoundTripCache map_round_trip_cached(const AclModel& model, const Matrix& z, Direction direction,
                                     const PassOptions& pass) {
  require_cols(z, model.dims().encoder_out, "map_round_trip");
  const MappingHead& first = direction == Direction::source ? model.head_st : model.head_ts;
  const MappingHead& second = direction == Direction::source ? model.head_ts : model.head_st;
  RoundTripCache c;
  c.first = head_forward(first, z, pass);
  c.second = head_forward(second, c.first.output, pass);
  return c;
}

Matrix map_round_trip(const AclModel& model, const Matrix& z, Direction direction,
                      const PassOptions& pass) {
  return map_round_trip_cached(model, z, direction, pass).output();
}

Matrix map_round_trip_backward(AclModel& model, const RoundTripCache& c, Direction direction,
                               const Matrix& upstream) {
  MappingHead& first = direction == Direction::source ? model.head_st : model.head_ts;
  MappingHead& second = direction == Direction::source ? model.head_ts : model.head_st;
  Matrix d_mid = head_backward(second, c.second, upstream);
  return head_backward(first, c.first, d_mid);
}

}  // namespace acl
