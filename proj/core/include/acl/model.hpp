#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "acl/layers.hpp"
#include "acl/matrix.hpp"
#include "acl/optim.hpp"
#include "acl/rng.hpp"

namespace acl {

struct ModelDims {
  std::size_t feature_dim = 1000;
  std::size_t encoder_hidden = 1000;
  // Width of the shared encoding; conventionally equal to num_classes.
  std::size_t encoder_out = 997;
  std::size_t num_classes = 997;
  std::size_t disc_hidden = 256;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Trainable parameter groups. Every tensor of the model belongs to exactly one.
enum class ParamGroup { encoder, classifier, adversarial, consistency };
inline constexpr ParamGroup kAllGroups[] = {ParamGroup::encoder, ParamGroup::classifier,
                                            ParamGroup::adversarial, ParamGroup::consistency};
const char* group_name(ParamGroup g);

// dense(feature_dim -> hidden) -> relu -> dropout -> dense(hidden -> encoder_out)
struct Encoder {
  DenseLayer dense1;
  DenseLayer dense2;
};

// dense(encoder_out -> num_classes) followed by a row softmax.
struct Classifier {
  DenseLayer dense;
};

// dense(encoder_out -> disc_hidden) -> relu -> dense(disc_hidden -> 1) -> sigmoid
struct Discriminator {
  DenseLayer hidden;
  DenseLayer output;
};

// relu -> dropout -> dense(encoder_out -> encoder_out)
struct MappingHead {
  DenseLayer dense;
};

// Identity on the way forward; multiplies gradients by -tau on the way back.
struct GradientReversal {
  double tau = 0.31;

  const Matrix& forward(const Matrix& x) const { return x; }
  Matrix backward(const Matrix& upstream) const;
};

// Which discriminator. `source_zero` labels source 0 / target 1 and
// `source_one` the opposite.
enum class DomainLabeling { source_zero, source_one };

enum class Direction {
  // source-side round trip: head_ts(head_st(z))
  source,
  // target-side round trip: head_st(head_ts(z))
  target,
};

class AclModel {
 public:
  AclModel() = default;
  // All parameters zero.
  explicit AclModel(const ModelDims& dims);
  // Glorot-uniform weights, zero biases.
  static AclModel initialized(const ModelDims& dims, RngStream& rng);

  const ModelDims& dims() const { return dims_; }

  Encoder encoder;
  Classifier classifier;
  Discriminator disc1;  // source 0, target 1
  Discriminator disc2;  // source 1, target 0
  MappingHead head_st;
  MappingHead head_ts;
  GradientReversal grl;

  Discriminator& discriminator(DomainLabeling which) {
    return which == DomainLabeling::source_zero ? disc1 : disc2;
  }
  const Discriminator& discriminator(DomainLabeling which) const {
    return which == DomainLabeling::source_zero ? disc1 : disc2;
  }

  // Tensors of one group in a fixed declaration order.
  std::vector<ParamRef> params(ParamGroup group);
  // All tensors: encoder, classifier, adversarial, consistency.
  std::vector<ParamRef> all_params();
  // Read-only view of the same tensors, same order as all_params().
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;
  std::size_t parameter_count() const;

  void zero_grad();

 private:
  ModelDims dims_;
};

// Controls dropout for a forward pass. In eval mode `rng` is never touched.
struct PassOptions {
  bool train_mode = false;
  double dropout_rate = 0.5;
  RngStream* rng = nullptr;
};

struct EncoderCache {
  Matrix input;
  Matrix pre_activation;
  Matrix dropout_mask;
  Matrix hidden;  // after relu and dropout
  Matrix output;
};

EncoderCache encode_cached(const AclModel& model, const Matrix& x, const PassOptions& pass);
Matrix encode(const AclModel& model, const Matrix& x, const PassOptions& pass = {});
// Accumulates encoder gradients. The input gradient is not formed.
void encode_backward(AclModel& model, const EncoderCache& cache, const Matrix& upstream);

// Returns class probabilities (N x num_classes).
Matrix classify(const AclModel& model, const Matrix& z);
// `grad_logits` is the gradient wrt the pre-softmax logits. Returns dL/dz.
Matrix classify_backward(AclModel& model, const Matrix& z, const Matrix& grad_logits);

struct DiscriminatorCache {
  Matrix input;
  Matrix pre_activation;
  Matrix hidden;
  Matrix probs;  // N x 1, clamped sigmoid
};

DiscriminatorCache discriminate_cached(const AclModel& model, const Matrix& z,
                                       DomainLabeling which);
Matrix discriminate(const AclModel& model, const Matrix& z, DomainLabeling which);
// `grad_logits` is wrt the pre-sigmoid logit. Returns dL/dz.
Matrix discriminate_backward(AclModel& model, DomainLabeling which,
                             const DiscriminatorCache& cache, const Matrix& grad_logits);

Matrix grl_backward(const GradientReversal& grl, const Matrix& upstream);

struct HeadCache {
  Matrix input;
  Matrix dropout_mask;
  Matrix hidden;
  Matrix output;
};

struct RoundTripCache {
  HeadCache first;
  HeadCache second;
  const Matrix& output() const { return second.output; }
};

RoundTripCache map_round_trip_cached(const AclModel& model, const Matrix& z, Direction direction,
                                     const PassOptions& pass);
Matrix map_round_trip(const AclModel& model, const Matrix& z, Direction direction,
                      const PassOptions& pass = {});
Matrix map_round_trip_backward(AclModel& model, const RoundTripCache& cache, Direction direction,
                               const Matrix& upstream);

}  // namespace acl
