#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "acl/binary_io.hpp"
#include "acl/data.hpp"
#include "acl/errors.hpp"
#include "acl/model_io.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace acl {
namespace {

using namespace acl::testing;

std::string slurp(const std::filesystem::path& p) {
  const auto bytes = io::read_file(p);
  return {bytes.begin(), bytes.end()};
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

Matrix float_exact(std::size_t r, std::size_t c, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix m = random_matrix(r, c, rng, -10, 10);
  for (auto& v : m.values()) v = static_cast<float>(v);
  return m;
}

TEST(FeatureFile, BinaryRoundTripAndLayout) {
  TempDir dir;
  const Matrix m = float_exact(3, 2, 1);
  save_features_binary(m, dir / "f.aclf");
  EXPECT_EQ(load_features_binary(dir / "f.aclf"), m);
  EXPECT_EQ(load_features(dir / "f.aclf"), m);
  const std::string bytes = slurp(dir / "f.aclf");
  ASSERT_EQ(bytes.size(), 16u + 6 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "ACLF");
  std::string header = "ACLF";
  put_u32(header, 1);
  put_u32(header, 3);
  put_u32(header, 2);
  EXPECT_EQ(bytes.substr(0, 16), header);
  float first;
  std::memcpy(&first, bytes.data() + 16, 4);
  EXPECT_EQ(static_cast<double>(first), m(0, 0));
}

TEST(FeatureFile, CorruptMagicVersionAndTruncation) {
  const Matrix m = float_exact(4, 3, 2);
  TempDir dir;
  save_features_binary(m, dir / "f.aclf");
  const std::string good = slurp(dir / "f.aclf");
  std::string bad = good;
  bad[1] = 'X';
  EXPECT_THROW((void)parse_features_binary(bad), FormatError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW((void)parse_features_binary(bad), FormatError);
  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    EXPECT_THROW((void)parse_features_binary(std::span<const char>(good.data(), cut)),
                 FormatError)
        << cut;
  }
  EXPECT_THROW((void)parse_features_binary(good + "x"), FormatError);
}

TEST(FeatureFile, OverflowSizedHeaderRejectedBeforeAllocation) {
  std::string bytes = "ACLF";
  put_u32(bytes, 1);
  put_u32(bytes, 0xFFFFFFFFu);
  put_u32(bytes, 0xFFFFFFFFu);
  bytes.append(1000, '\0');
  EXPECT_THROW((void)parse_features_binary(bytes), FormatError);
}

TEST(FeatureFile, NonFiniteValuesRejected) {
  std::string bytes = "ACLF";
  put_u32(bytes, 1);
  put_u32(bytes, 1);
  put_u32(bytes, 1);
  const float nan = std::nanf("");
  bytes.append(reinterpret_cast<const char*>(&nan), 4);
  EXPECT_THROW((void)parse_features_binary(bytes), FormatError);
}

TEST(FeatureFile, CsvParsing) {
  EXPECT_EQ(parse_features_csv("1,2.5\r\n-3,4e2\n\n"), (Matrix{{1, 2.5}, {-3, 400}}));
  EXPECT_EQ(parse_features_csv("a,b\n1,2\n", CsvOptions{true}), (Matrix{{1, 2}}));
  EXPECT_EQ(parse_features_csv("").rows(), 0u);
  try {
    (void)parse_features_csv("1,2\n3,x\n");
    FAIL();
  } catch (const FormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 2"), std::string::npos) << what;
    EXPECT_NE(what.find("column 2"), std::string::npos) << what;
  }
  EXPECT_THROW((void)parse_features_csv("1,2\n3\n"), FormatError);
  EXPECT_THROW((void)parse_features_csv("1;2\n"), FormatError);
  EXPECT_THROW((void)parse_features_csv("1,,2\n"), FormatError);
}

TEST(FeatureFile, CsvFileRoundTrip) {
  TempDir dir;
  const Matrix m = float_exact(5, 4, 3);
  save_features_csv(m, dir / "f.csv");
  EXPECT_EQ(load_features(dir / "f.csv"), m);
}

TEST(LabelFile, TextAndBinary) {
  const std::string text = "0\n2\n1";
  EXPECT_EQ(parse_labels(text), (std::vector<int>{0, 2, 1}));
  EXPECT_EQ(parse_labels(std::string("")), std::vector<int>{});
  EXPECT_EQ(parse_labels(std::string("3\r\n-1\n")), (std::vector<int>{3, -1}));
  EXPECT_THROW((void)parse_labels(std::string("1\n2.5\n")), FormatError);
  EXPECT_THROW((void)parse_labels(std::string("1\nabc\n")), FormatError);
  TempDir dir;
  const std::vector<int> labels{4, 0, -1, 7};
  save_labels_binary(labels, dir / "l.acll");
  save_labels_text(labels, dir / "l.txt");
  EXPECT_EQ(load_labels(dir / "l.acll"), labels);
  EXPECT_EQ(load_labels(dir / "l.txt"), labels);
  const std::string bin = slurp(dir / "l.acll");
  EXPECT_EQ(bin.size(), 8u + 16u);
  for (std::size_t cut = 5; cut < bin.size(); ++cut) {
    EXPECT_THROW((void)parse_labels(std::span<const char>(bin.data(), cut)), FormatError) << cut;
  }
  std::string huge = "ACLL";
  put_u32(huge, 0xFFFFFFFFu);
  EXPECT_THROW((void)parse_labels(huge), FormatError);
}

TEST(Dataset, Validation) {
  EXPECT_THROW((void)make_dataset(Matrix(2, 3), {0}, 2, "x"), DataError);
  EXPECT_THROW((void)make_dataset(Matrix(2, 3), {0, 2}, 2, "x"), DataError);
  const DomainDataset d = make_dataset(Matrix(2, 3), {0, kUnknownLabel}, 2, "x");
  EXPECT_FALSE(d.fully_labeled());
  EXPECT_NO_THROW((void)make_dataset(Matrix(2, 3), {}, 2, "x"));
}

TEST(Synthetic, ShapesLabelsAndDeterminism) {
  SynthSpec spec;
  spec.num_source_classes = 5;
  spec.num_shared_classes = 3;
  spec.feature_dim = 8;
  spec.samples_per_class_source = 7;
  spec.samples_per_class_target = 4;
  const auto [src, tgt] = generate_synthetic_pda(spec);
  EXPECT_EQ(src.size(), 35u);
  EXPECT_EQ(tgt.size(), 12u);
  EXPECT_EQ(src.num_classes, 5u);
  for (int l : tgt.labels) EXPECT_LT(l, 3);
  for (double v : src.features.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  const auto [src2, tgt2] = generate_synthetic_pda(spec);
  EXPECT_EQ(src.features, src2.features);
  EXPECT_EQ(tgt.features, tgt2.features);
  spec.seed = 2;
  EXPECT_NE(generate_synthetic_pda(spec).first.features, src.features);
  spec.num_shared_classes = 6;
  EXPECT_THROW((void)generate_synthetic_pda(spec), ConfigError);
}

TEST(Synthetic, ClassMeansConvergeAndShiftIsApplied) {
  SynthSpec spec;
  spec.num_source_classes = 3;
  spec.num_shared_classes = 2;
  spec.feature_dim = 5;
  spec.samples_per_class_source = 4000;
  spec.samples_per_class_target = 4000;
  spec.noise_sigma = 1.5;
  const auto [src, tgt] = generate_synthetic_pda(spec);
  const SynthGeometry g = synthetic_geometry(spec);
  double shift_norm = 0.0;
  for (double v : g.shift.values()) shift_norm += v * v;
  EXPECT_NEAR(std::sqrt(shift_norm), spec.shift_magnitude, 1e-12);
  for (std::size_t c = 0; c < 3; ++c) {
    double norm = 0.0;
    for (std::size_t k = 0; k < 5; ++k) norm += g.class_means(c, k) * g.class_means(c, k);
    EXPECT_NEAR(std::sqrt(norm), spec.class_separation, 1e-12);
  }
  const double tol = 3.0 * spec.noise_sigma / std::sqrt(4000.0);
  auto check = [&](const DomainDataset& d, std::size_t c, bool shifted) {
    for (std::size_t k = 0; k < 5; ++k) {
      double s = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.labels[i] == static_cast<int>(c)) {
          s += d.features(i, k);
          ++n;
        }
      }
      const double expect = g.class_means(c, k) + (shifted ? g.shift(0, k) : 0.0);
      EXPECT_NEAR(s / static_cast<double>(n), expect, tol);
    }
  };
  for (std::size_t c = 0; c < 3; ++c) check(src, c, false);
  for (std::size_t c = 0; c < 2; ++c) check(tgt, c, true);
}

TEST(ModelFile, RoundTripWithWeights) {
  TempDir dir;
  const AclModel m = tiny_model(5);
  TrainConfig c = tiny_config();
  c.gamma = 0.25;
  c.single_direction_adversarial = true;
  c.optimizer = OptimizerKind::sgd;
  auto w = weights_from_raw({0.5, 0.5, 0.0, 0.0}, 1e-9);
  w.updated_at_iteration = 77;
  save_model(m, dir / "m.aclm", c, &w);
  const ModelFile mf = load_model(dir / "m.aclm");
  EXPECT_EQ(mf.config, c);
  ASSERT_TRUE(mf.class_weights.has_value());
  EXPECT_EQ(*mf.class_weights, w);
  EXPECT_EQ(mf.model.dims(), m.dims());
  EXPECT_EQ(mf.model.grl.tau, c.tau);
  const auto a = m.named_tensors();
  const auto b = mf.model.named_tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(*a[i].second, *b[i].second);
  }
  EXPECT_EQ(serialize_model(mf.model, mf.config, &*mf.class_weights), slurp(dir / "m.aclm"));
  EXPECT_FALSE(parse_model(serialize_model(m, c)).class_weights.has_value());
}

TEST(ModelFile, EveryTruncationAndCorruptMagicRejected) {
  const std::string bytes = serialize_model(tiny_model(6), tiny_config());
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    EXPECT_THROW((void)parse_model(std::span<const char>(bytes.data(), cut)), FormatError) << cut;
  }
  std::string bad = bytes;
  bad[3] = 'Z';
  EXPECT_THROW((void)parse_model(bad), FormatError);
  EXPECT_THROW((void)parse_model(bytes + "trailing"), FormatError);
}

TEST(ModelFile, OverflowDimensionsRejected) {
  std::string bytes = "ACLM";
  put_u32(bytes, 1);
  for (int i = 0; i < 5; ++i) put_u32(bytes, 0xFFFFFFFFu);
  bytes.append(256, '\0');
  EXPECT_THROW((void)parse_model(bytes), FormatError);
  // Plausible dims whose parameter payload is missing.
  std::string big = "ACLM";
  put_u32(big, 1);
  for (std::uint32_t v : {100000u, 100000u, 1000u, 1000u, 256u}) put_u32(big, v);
  const std::string tail = serialize_model(tiny_model(1), tiny_config()).substr(28);
  EXPECT_THROW((void)parse_model(big + tail), FormatError);
}

TEST(ByteIo, AtomicWriteReplacesWholeFile) {
  TempDir dir;
  io::write_file_atomic(dir / "a.txt", "first version");
  io::write_file_atomic(dir / "a.txt", "2nd");
  EXPECT_EQ(slurp(dir / "a.txt"), "2nd");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1u);
  EXPECT_THROW((void)io::read_file(dir / "missing"), DataError);
  EXPECT_THROW(io::write_file_atomic(dir / "no/such/dir/x", "y"), DataError);
}

}  // namespace
}  // namespace acl
