#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "acl/errors.hpp"
#include "acl/gradcheck.hpp"
#include "acl/losses.hpp"
#include "acl/model.hpp"
#include "acl/trainer.hpp"
#include "support/oracles.hpp"

namespace acl {
namespace {

using namespace acl::testing;

const double kLn2 = std::numbers::ln2;

TEST(Model, ShapesAndParameterCount) {
  ModelDims d;
  d.feature_dim = 10;
  d.encoder_hidden = 8;
  d.encoder_out = 4;
  d.num_classes = 4;
  d.disc_hidden = 3;
  AclModel m(d);
  const std::size_t expect = (10 * 8 + 8) + (8 * 4 + 4)  // encoder
                             + (4 * 4 + 4)                // classifier
                             + 2 * ((4 * 3 + 3) + (3 + 1))  // discriminators
                             + 2 * (4 * 4 + 4);           // heads
  EXPECT_EQ(m.parameter_count(), expect);
  std::size_t by_group = 0;
  for (ParamGroup g : kAllGroups) {
    for (auto& p : m.params(g)) by_group += p.value->size();
  }
  EXPECT_EQ(by_group, expect);
  EXPECT_EQ(m.all_params().size(), m.named_tensors().size());
  d.num_classes = 0;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Model, InitializationIsSeedDeterministic) {
  const ModelDims d = tiny_dims();
  RngStream a(5), b(5), c(6);
  const AclModel ma = AclModel::initialized(d, a);
  const AclModel mb = AclModel::initialized(d, b);
  const AclModel mc = AclModel::initialized(d, c);
  EXPECT_EQ(ma.encoder.dense1.weights(), mb.encoder.dense1.weights());
  EXPECT_EQ(ma.head_ts.dense.weights(), mb.head_ts.dense.weights());
  EXPECT_NE(ma.encoder.dense1.weights(), mc.encoder.dense1.weights());
}

TEST(Model, ForwardMatchesScalarOracle) {
  const AclModel m = tiny_model(3);
  const Batch b = tiny_batch(4);
  const Matrix z = encode(m, b.source_features);
  const Matrix p = classify(m, z);
  const Matrix d1 = discriminate(m, z, DomainLabeling::source_zero);
  const Matrix rt = map_round_trip(m, z, Direction::source);
  const Matrix rt_t = map_round_trip(m, z, Direction::target);
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec x(b.source_features.row(i).begin(), b.source_features.row(i).end());
    const Vec zo = encode_row(m, x);
    const Vec po = classify_row(m, zo);
    for (std::size_t k = 0; k < zo.size(); ++k) EXPECT_NEAR(z(i, k), zo[k], 1e-13);
    for (std::size_t k = 0; k < po.size(); ++k) EXPECT_NEAR(p(i, k), po[k], 1e-13);
    EXPECT_NEAR(d1(i, 0), discriminate_row(m.disc1, zo), 1e-13);
    const Vec r = round_trip_row(m.head_st, m.head_ts, zo);
    const Vec rt2 = round_trip_row(m.head_ts, m.head_st, zo);
    for (std::size_t k = 0; k < r.size(); ++k) {
      EXPECT_NEAR(rt(i, k), r[k], 1e-13);
      EXPECT_NEAR(rt_t(i, k), rt2[k], 1e-13);
    }
  }
}

TEST(Model, GradientReversalContract) {
  const GradientReversal grl{0.31};
  const Matrix x{{1.5, -2.0, 0.0}};
  EXPECT_EQ(&grl.forward(x), &x);
  const Matrix g = grl.backward(Matrix{{2.0, -4.0, 1.0}});
  EXPECT_EQ(g, (Matrix{{-0.31 * 2.0, 0.31 * 4.0, -0.31}}));
  EXPECT_EQ(grl_backward(grl, Matrix{{1.0}}), (Matrix{{-0.31}}));
}

TEST(Model, IdentityAndZeroHeads) {
  ModelDims d = tiny_dims();
  AclModel m(d);
  for (std::size_t i = 0; i < d.encoder_out; ++i) {
    m.head_st.dense.weights()(i, i) = 1.0;
    m.head_ts.dense.weights()(i, i) = 1.0;
  }
  const Matrix z{{0.0, 1.0, 2.5, 0.25, 3.0}};
  EXPECT_EQ(map_round_trip(m, z, Direction::source), z);
  EXPECT_EQ(map_round_trip(m, z, Direction::target), z);
  AclModel zero(d);
  EXPECT_EQ(map_round_trip(zero, z, Direction::source), Matrix(1, 5));
}

TEST(Losses, ZeroDiscriminatorsGiveLn2Constants) {
  AclModel m(tiny_dims());
  const Batch b = tiny_batch(1);
  TrainConfig c = tiny_config();
  const LossReport r = evaluate_losses(m, b, nullptr, c);
  EXPECT_NEAR(r.l_adv_st, 2 * kLn2, 1e-9);
  EXPECT_NEAR(r.l_adv_ts, 2 * kLn2, 1e-9);
  EXPECT_NEAR(r.l_adv_total, 4 * kLn2, 1e-9);
  // Zero classifier weights: uniform over 4 classes.
  EXPECT_NEAR(r.l_source, std::log(4.0), 1e-9);
}

TEST(Losses, ClassificationExamples) {
  const Matrix p{{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}};
  const int labels[] = {0, 2};
  const auto l = source_classification_loss(p, labels);
  EXPECT_NEAR(l.value, -(std::log(0.7) + std::log(0.8)) / 2, 1e-15);
  // Gradient wrt logits is (p - onehot) / N.
  EXPECT_NEAR(l.grad_logits(0, 0), (0.7 - 1) / 2, 1e-15);
  EXPECT_NEAR(l.grad_logits(1, 1), 0.1 / 2, 1e-15);
  const double w[] = {1.0, 1.0, 0.0};
  const auto lw = source_classification_loss(p, labels, w);
  EXPECT_NEAR(lw.value, -std::log(0.7) / 2, 1e-15);
  for (double g : lw.grad_logits.row(1)) EXPECT_EQ(g, 0.0);
  const int bad[] = {0, 3};
  try {
    (void)source_classification_loss(p, bad);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 1"), std::string::npos);
  }
}

TEST(Losses, AllOnesWeightsEqualUnweighted) {
  const AclModel m = tiny_model(8);
  const Batch b = tiny_batch(9);
  const TrainConfig c = tiny_config();
  const ClassWeightVector ones = ClassWeightVector::uniform(4);
  EXPECT_EQ(evaluate_losses(m, b, nullptr, c), evaluate_losses(m, b, &ones, c));
}

TEST(Losses, MatchScalarOracleWithWeights) {
  const AclModel m = tiny_model(12);
  const Batch b = tiny_batch(13);
  const TrainConfig c = tiny_config();
  const Vec w = {1.0, 0.25, 0.0, 0.5};
  ClassWeightVector cw = ClassWeightVector::uniform(4);
  cw.active = w;
  const LossReport r = evaluate_losses(m, b, &cw, c);
  const ScalarLosses o = scalar_losses(m, b, w);
  EXPECT_NEAR(r.l_source, o.l_source, 1e-12);
  EXPECT_NEAR(r.l_adv_st, o.l_adv_st, 1e-12);
  EXPECT_NEAR(r.l_adv_ts, o.l_adv_ts, 1e-12);
  EXPECT_NEAR(r.l_con, o.l_con, 1e-12);
  EXPECT_NEAR(r.l_total, o.l_source + 0.5 * (o.l_adv_st + o.l_adv_ts) + 0.5 * o.l_con, 1e-12);
}

TEST(Losses, AdversarialRejectsOutOfRangeProbabilities) {
  EXPECT_THROW((void)adversarial_direction_loss(Matrix{{1.0}}, Matrix{{0.5}},
                                                DomainLabeling::source_zero),
               NumericError);
  const auto l = adversarial_direction_loss(Matrix{{0.5}}, Matrix{{0.5}},
                                            DomainLabeling::source_one);
  EXPECT_NEAR(l.value, 2 * kLn2, 1e-15);
}

TEST(Losses, ConsistencyZeroHeadsOnOnes) {
  ModelDims d = tiny_dims();
  d.encoder_out = 4;
  AclModel m(d);
  const Matrix z(1, 4, 1.0);
  const auto l = consistency_loss(z, z, m, {}, PassOptions{});
  EXPECT_DOUBLE_EQ(l.value, 2.0);
  EXPECT_DOUBLE_EQ(l.source_term, 1.0);
  EXPECT_DOUBLE_EQ(consistency_loss_value(z, z, m, {}, PassOptions{}), 2.0);
  EXPECT_THROW((void)consistency_loss(Matrix(1, 3), z, m, {}, PassOptions{}), DimensionError);
}

TEST(Losses, TotalObjectiveAndSampleWeights) {
  EXPECT_DOUBLE_EQ(total_objective(1.0, 2.0, 3.0, 0.5, 0.25), 1.0 + 1.0 + 0.75);
  const double cw[] = {1.0, 0.0, 0.5};
  const int labels[] = {2, 0, 1, 2};
  EXPECT_EQ(per_sample_weights(cw, labels), (std::vector<double>{0.5, 1.0, 0.0, 0.5}));
}

// Finite-difference check of one masked component in objective mode.
double component_error(const ComponentMask& mask, double (*pick)(const LossReport&),
                       const ClassWeightVector* cw) {
  AclModel m = tiny_model(31);
  const Batch b = tiny_batch(32);
  const TrainConfig c = tiny_config();
  compute_gradients(m, b, cw, c, GradientMode::objective, PassOptions{}, mask);
  auto loss = [&] { return pick(evaluate_losses(m, b, cw, c)); };
  auto params = m.all_params();
  return finite_diff_check(loss, params, 1e-6).max_relative_error;
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  ClassWeightVector cw = ClassWeightVector::uniform(4);
  cw.active = {1.0, 0.3, 0.0, 0.7};
  for (const ClassWeightVector* w : {static_cast<const ClassWeightVector*>(nullptr),
                                     static_cast<const ClassWeightVector*>(&cw)}) {
    EXPECT_LT(component_error({true, false, false, false},
                              [](const LossReport& r) { return r.l_source; }, w),
              1e-6);
    EXPECT_LT(component_error({false, true, false, false},
                              [](const LossReport& r) { return 0.5 * r.l_adv_st; }, w),
              1e-6);
    EXPECT_LT(component_error({false, false, true, false},
                              [](const LossReport& r) { return 0.5 * r.l_adv_ts; }, w),
              1e-6);
    EXPECT_LT(component_error({false, false, false, true},
                              [](const LossReport& r) { return 0.5 * r.l_con; }, w),
              1e-6);
    EXPECT_LT(component_error({}, [](const LossReport& r) { return r.l_total; }, w), 1e-6);
  }
}

}  // namespace
}  // namespace acl
