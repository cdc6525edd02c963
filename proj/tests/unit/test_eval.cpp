#include <gtest/gtest.h>

#include <algorithm>

#include "acl/errors.hpp"
#include "acl/eval.hpp"
#include "acl/layers.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace acl {
namespace {

using namespace acl::testing;

// Position of `cls` when classes are sorted by descending probability, ties
// by ascending id, computed by counting the classes that beat it.
std::size_t brute_rank(std::span<const double> p, std::size_t cls) {
  std::size_t better = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > p[cls] || (p[j] == p[cls] && j < cls)) ++better;
  }
  return better + 1;
}

PredictionSet random_predictions(std::size_t n, std::size_t c, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix probs(n, c);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse values so that ties are common.
    for (double& v : probs.row(i)) v = static_cast<double>(rng.below(6));
    double s = 0.0;
    for (double v : probs.row(i)) s += v;
    if (s == 0.0) {
      probs(i, 0) = 1.0;
      s = 1.0;
    }
    for (double& v : probs.row(i)) v /= s;
    labels[i] = static_cast<int>(rng.below(c));
  }
  return make_prediction_set(std::move(probs), std::move(labels));
}

TEST(Metrics, AccuracyAndMrrMatchBruteForce) {
  const PredictionSet pred = random_predictions(10000, 9, 1);
  std::size_t hits = 0;
  double rr = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto y = static_cast<std::size_t>(pred.labels[i]);
    const std::size_t r = brute_rank(pred.probs.row(i), y);
    ASSERT_EQ(pred.rank_of(i, y), r);
    hits += r == 1;
    rr += 1.0 / static_cast<double>(r);
  }
  EXPECT_EQ(accuracy(pred), 100.0 * static_cast<double>(hits) / 10000.0);
  EXPECT_EQ(mean_reciprocal_rank(pred), rr / 10000.0);
}

TEST(Metrics, FixedMrrCases) {
  // Ranks {1} -> 1, {4} -> 0.25, {1, 4} -> 0.625.
  const Matrix rank1{{0.7, 0.1, 0.1, 0.1}};
  const Matrix rank4{{0.4, 0.3, 0.2, 0.1}};
  EXPECT_EQ(mean_reciprocal_rank(make_prediction_set(rank1, {0})), 1.0);
  EXPECT_EQ(mean_reciprocal_rank(make_prediction_set(rank4, {3})), 0.25);
  const Matrix both{{0.7, 0.1, 0.1, 0.1}, {0.4, 0.3, 0.2, 0.1}};
  const PredictionSet p = make_prediction_set(both, {0, 3});
  EXPECT_EQ(mean_reciprocal_rank(p), 0.625);
  EXPECT_EQ(accuracy(p), 50.0);
}

TEST(Metrics, MrrIsOneExactlyWhenAccuracyIsHundred) {
  const PredictionSet p = make_prediction_set(Matrix{{0.9, 0.1}, {0.2, 0.8}}, {0, 1});
  EXPECT_EQ(accuracy(p), 100.0);
  EXPECT_EQ(mean_reciprocal_rank(p), 1.0);
  const PredictionSet q = make_prediction_set(Matrix{{0.9, 0.1}, {0.2, 0.8}}, {0, 0});
  EXPECT_LT(mean_reciprocal_rank(q), 1.0);
}

TEST(Metrics, TiesRankLowerIdFirst) {
  const PredictionSet p = make_prediction_set(Matrix{{0.25, 0.25, 0.25, 0.25}}, {});
  const auto r = p.ranked(0);
  EXPECT_EQ(std::vector<std::uint32_t>(r.begin(), r.end()), (std::vector<std::uint32_t>{0, 1, 2, 3}));
  EXPECT_THROW((void)accuracy(p), UsageError);
}

TEST(Predict, MaskingRemovesZeroWeightClasses) {
  AclModel m(tiny_dims());
  m.classifier.dense.bias()(0, 3) = 5.0;
  const Matrix x(2, 6, 0.1);
  const PredictionSet plain = predict(m, x);
  EXPECT_EQ(plain.top1(0), 3u);
  const auto w = weights_from_raw({0.3, 0.3, 0.4, 0.0}, 1e-9);
  const PredictionSet masked = predict(m, x, PredictOptions{&w});
  EXPECT_NE(masked.top1(0), 3u);
  EXPECT_EQ(masked.probs(0, 3), 0.0);
  double s = 0.0;
  for (double v : masked.probs.row(0)) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_THROW((void)predict(m, Matrix(1, 5)), DimensionError);
}

TEST(Predict, ChunkingDoesNotChangeResults) {
  const AclModel m = tiny_model(3);
  RngStream rng(4);
  const Matrix x = random_matrix(50, 6, rng);
  EXPECT_EQ(predict(m, x, PredictOptions{nullptr, 7}).probs, predict(m, x).probs);
}

TEST(Export, CsvRowsAndRoundTrip) {
  const PredictionSet pred = random_predictions(20, 5, 2);
  const std::string csv = format_predictions_csv(pred, 3);
  const auto rows = parse_predictions_csv(csv);
  ASSERT_EQ(rows.size(), 60u);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      const PredictionRow& r = rows[i * 3 + k];
      EXPECT_EQ(r.sample_index, i);
      EXPECT_EQ(r.rank, k + 1);
      EXPECT_EQ(r.class_id, pred.ranked(i)[k]);
      EXPECT_EQ(r.probability, pred.probs(i, r.class_id));
      if (k > 0) {
        EXPECT_LE(r.probability, rows[i * 3 + k - 1].probability);
      }
    }
  }
  const auto top1 = format_predictions_csv(pred, 1);
  EXPECT_EQ(std::count(top1.begin(), top1.end(), '\n'), 21);
  EXPECT_THROW((void)format_predictions_csv(pred, 0), UsageError);
  EXPECT_THROW((void)parse_predictions_csv("sample_index,rank,class_id,probability\n1,2\n"),
               FormatError);
  TempDir dir;
  export_predictions(pred, dir / "p.csv", 2);
  EXPECT_TRUE(std::filesystem::exists(dir / "p.csv"));
}

TEST(Diagnostics, ConstantHalfDiscriminatorHasZeroProxy) {
  const std::vector<double> half(10, 0.5);
  for (auto lab : {DomainLabeling::source_zero, DomainLabeling::source_one}) {
    const DomainSeparation d = domain_separation(half, half, lab);
    EXPECT_EQ(d.balanced_error, 0.5);
    EXPECT_EQ(d.proxy_distance, 0.0);
  }
}

TEST(Diagnostics, PerfectSeparationHasProxyTwo) {
  const std::vector<double> lo(5, 0.1), hi(5, 0.9);
  const DomainSeparation d = domain_separation(lo, hi, DomainLabeling::source_zero);
  EXPECT_EQ(d.balanced_error, 0.0);
  EXPECT_EQ(d.proxy_distance, 2.0);
  const DomainSeparation flipped = domain_separation(lo, hi, DomainLabeling::source_one);
  EXPECT_EQ(flipped.balanced_error, 1.0);
  EXPECT_EQ(proxy_distance(0.25), 1.0);
}

TEST(Diagnostics, ZeroModelDiscriminatorsAndProbe) {
  // A zero model scores 0.5 everywhere: both discriminators are at chance.
  AclModel m(tiny_dims());
  RngStream rng(1);
  const Matrix xs = random_matrix(40, 6, rng, -1, 0);
  const Matrix xt = random_matrix(40, 6, rng, 0, 1);
  const DiagnosticsReport r = domain_diagnostics(m, xs, xt);
  EXPECT_EQ(r.disc1.proxy_distance, 0.0);
  EXPECT_EQ(r.disc2.proxy_distance, 0.0);
  // Encodings are all zero, so the probe cannot separate the domains either.
  EXPECT_LE(r.probe.proxy_distance, 0.0 + 1e-12);
  EXPECT_NE(format_diagnostics(r).find("proxy_distance"), std::string::npos);
}

TEST(Diagnostics, ProbeSeparatesDistinctEncodings) {
  const AclModel m = tiny_model(2);
  RngStream rng(3);
  const Matrix xs = random_matrix(60, 6, rng, -2, -1);
  const Matrix xt = random_matrix(60, 6, rng, 1, 2);
  const DiagnosticsReport r = domain_diagnostics(m, xs, xt);
  EXPECT_GT(r.proxy_distance, 1.5);
  EXPECT_EQ(r.proxy_distance, r.probe.proxy_distance);
  EXPECT_THROW((void)domain_diagnostics(m, Matrix(1, 6), xt), DataError);
}

}  // namespace
}  // namespace acl
