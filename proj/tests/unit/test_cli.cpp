#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "acl/binary_io.hpp"
#include "acl/cli/cli.hpp"
#include "acl/cli/run_config.hpp"
#include "acl/errors.hpp"
#include "acl/eval.hpp"
#include "support/temp_dir.hpp"

namespace acl::cli {
namespace {

using acl::testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_acl(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  const auto bytes = io::read_file(p);
  return {bytes.begin(), bytes.end()};
}

TEST(RunConfig, DefaultsRoundTripThroughText) {
  RunConfig a;
  a.train.gamma = 0.125;
  a.train.seed = 12345678901234ULL;
  a.train.encoder_out = 9;
  a.num_classes = 20;
  a.source_features = "s.aclf";
  RunConfig b;
  apply_config_text(b, format_run_config(a));
  EXPECT_EQ(a, b);
  RunConfig c;
  apply_config_text(c, format_run_config(RunConfig{}));
  EXPECT_EQ(c, RunConfig{});
}

TEST(RunConfig, UnknownKeyAndBadValuesNameTheProblem) {
  RunConfig c;
  try {
    apply_config_text(c, "gamma = 0.75\n\nbogus_key = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("bogus_key"), std::string::npos);
    EXPECT_NE(what.find("line 3"), std::string::npos);
  }
  EXPECT_EQ(c.train.gamma, 0.75);
  EXPECT_THROW(apply_key(c, "iterations", "-5"), ConfigError);
  EXPECT_THROW(apply_key(c, "lr", "fast"), ConfigError);
  EXPECT_THROW(apply_key(c, "normalize_weights", "maybe"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "gamma 0.5\n"), ConfigError);
  apply_key(c, "optimizer", "sgd");
  EXPECT_EQ(c.train.optimizer, OptimizerKind::sgd);
  apply_key(c, "disable_weighting", "yes");
  EXPECT_TRUE(c.train.disable_weighting);
  for (const auto& k : config_keys()) EXPECT_FALSE(k.help.empty()) << k.name;
}

class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::make_unique<TempDir>();
    const auto r = run_acl({"gen-synth", "--out-dir", data(), "--source-classes", "6",
                            "--shared-classes", "3", "--feature-dim", "8", "--source-per-class",
                            "20", "--target-per-class", "10", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::string data() const { return (dir_->path() / "data").string(); }
  std::string file(const std::string& name) const { return data() + "/" + name; }
  std::vector<std::string> train_args(const std::string& out) const {
    return {"train",           "--source-features", file("source_features.aclf"),
            "--source-labels", file("source_labels.acll"),
            "--target-features", file("target_features.aclf"),
            "--target-labels", file("target_labels.acll"),
            "--out-dir",       out,
            "--iterations",    "40",
            "--batch-size",    "16",
            "--encoder-hidden", "16",
            "--disc-hidden",   "8",
            "--weight-update-interval", "10",
            "--quiet"};
  }
  std::unique_ptr<TempDir> dir_;
};

TEST_F(CliPipeline, TrainWritesThreeArtifactsDeterministically) {
  const std::string a = (dir_->path() / "a").string(), b = (dir_->path() / "b").string();
  ASSERT_EQ(run_acl(train_args(a)).code, 0);
  ASSERT_EQ(run_acl(train_args(b)).code, 0);
  for (const char* f : {"model.aclm", "history.csv", "config.resolved"}) {
    ASSERT_TRUE(std::filesystem::exists(a + "/" + f)) << f;
    if (std::string(f) != "config.resolved") {
      EXPECT_EQ(slurp(a + "/" + f), slurp(b + "/" + f));
    }
  }
  const std::string history = slurp(a + "/history.csv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 41);
  EXPECT_EQ(history.rfind("iteration,l_source,", 0), 0u);
  // The resolved config reproduces the run when fed back in.
  const std::string c = (dir_->path() / "c").string();
  const auto r = run_acl({"train", "--config", a + "/config.resolved", "--out-dir", c, "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(c + "/model.aclm"), slurp(a + "/model.aclm"));
}

TEST_F(CliPipeline, FlagsOverrideConfigFile) {
  const std::string cfg = (dir_->path() / "run.cfg").string();
  std::ofstream(cfg) << "gamma = 0.9\nbeta = 0.1\n";
  auto args = train_args((dir_->path() / "o").string());
  args.insert(args.end(), {"--config", cfg, "--gamma", "0.2"});
  ASSERT_EQ(run_acl(args).code, 0);
  RunConfig resolved;
  apply_config_file(resolved, (dir_->path() / "o" / "config.resolved").string());
  EXPECT_EQ(resolved.train.gamma, 0.2);
  EXPECT_EQ(resolved.train.beta, 0.1);
  EXPECT_EQ(resolved.train.iterations, 40u);
}

TEST_F(CliPipeline, CheckpointResumeMatchesUninterruptedRun) {
  const std::string full = (dir_->path() / "full").string();
  const std::string part = (dir_->path() / "part").string();
  ASSERT_EQ(run_acl(train_args(full)).code, 0);
  auto half = train_args(part);
  half.insert(half.end(), {"--checkpoint-every", "20"});
  half[12] = "20";  // value of --iterations
  ASSERT_EQ(run_acl(half).code, 0);
  auto resume = train_args((dir_->path() / "resumed").string());
  resume.insert(resume.end(), {"--resume", part + "/checkpoint.acls"});
  const auto r = run_acl(resume);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_->path() / "resumed" / "model.aclm"), slurp(full + "/model.aclm"));
  EXPECT_EQ(slurp(dir_->path() / "resumed" / "history.csv"), slurp(full + "/history.csv"));
}

TEST_F(CliPipeline, EvalPredictInspect) {
  const std::string out = (dir_->path() / "m").string();
  ASSERT_EQ(run_acl(train_args(out)).code, 0);
  const std::string model = out + "/model.aclm";
  const auto e = run_acl({"eval", "--model", model, "--features", file("target_features.aclf"),
                          "--labels", file("target_labels.acll"), "--source-features",
                          file("source_features.aclf")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("accuracy"), std::string::npos);
  EXPECT_NE(e.out.find("mrr"), std::string::npos);
  EXPECT_NE(e.out.find("proxy_distance"), std::string::npos);
  EXPECT_EQ(run_acl({"eval", "--model", model, "--features", file("target_features.aclf"),
                     "--labels", file("target_labels.acll"), "--source-features",
                     file("source_features.aclf")})
                .out,
            e.out);

  const std::string csv = (dir_->path() / "p.csv").string();
  const auto p = run_acl({"predict", "--model", model, "--features",
                          file("target_features.aclf"), "--out", csv, "--top-k", "2"});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto rows = parse_predictions_csv(slurp(csv));
  EXPECT_EQ(rows.size(), 60u);
  ASSERT_EQ(run_acl({"predict", "--model", model, "--features", file("target_features.aclf"),
                     "--out", csv, "--mask-weights"})
                .code,
            0);

  const auto w = run_acl({"inspect-weights", "--model", model, "--target-features",
                          file("target_features.aclf")});
  ASSERT_EQ(w.code, 0) << w.err;
  std::size_t table_rows = 0, dropped = 0;
  std::istringstream lines(w.out);
  for (std::string line; std::getline(lines, line);) {
    table_rows += line.find("kept") != std::string::npos && line.rfind("kept ", 0) != 0;
    if (line.find("dropped") != std::string::npos && line.rfind("kept ", 0) != 0) {
      ++table_rows;
      ++dropped;
    }
  }
  EXPECT_EQ(table_rows, 6u);
  EXPECT_NE(w.out.find("dropped " + std::to_string(dropped)), std::string::npos);
}

TEST_F(CliPipeline, ExitCodes) {
  // Usage and configuration problems: 2.
  EXPECT_EQ(run_acl({}).code, kExitUsage);
  EXPECT_EQ(run_acl({"frobnicate"}).code, kExitUsage);
  auto no_labels = train_args((dir_->path() / "x").string());
  no_labels.erase(no_labels.begin() + 3, no_labels.begin() + 5);
  const auto nl = run_acl(no_labels);
  EXPECT_EQ(nl.code, kExitUsage);
  EXPECT_EQ(nl.err.rfind("acl: error: usage:", 0), 0u) << nl.err;
  const std::string cfg = (dir_->path() / "bad.cfg").string();
  std::ofstream(cfg) << "gamma = 0.5\nwarp_factor = 9\n";
  const auto uk = run_acl({"train", "--config", cfg});
  EXPECT_EQ(uk.code, kExitUsage);
  EXPECT_NE(uk.err.find("warp_factor"), std::string::npos);
  EXPECT_EQ(std::count(uk.err.begin(), uk.err.end(), '\n'), 1);
  auto bad_value = train_args((dir_->path() / "x").string());
  bad_value.insert(bad_value.end(), {"--lr", "-1"});
  EXPECT_EQ(run_acl(bad_value).code, kExitUsage);
  EXPECT_EQ(run_acl({"gen-synth", "--out-dir", data(), "--source-classes", "3",
                     "--shared-classes", "4"})
                .code,
            kExitUsage);

  // Data and format problems: 3.
  const std::string junk = (dir_->path() / "junk.aclf").string();
  std::ofstream(junk) << "NOPE and more bytes";
  auto bad_data = train_args((dir_->path() / "x").string());
  bad_data[2] = junk;
  const auto bd = run_acl(bad_data);
  EXPECT_EQ(bd.code, kExitData);
  EXPECT_EQ(bd.err.rfind("acl: error: format:", 0), 0u) << bd.err;
  EXPECT_EQ(run_acl({"eval", "--model", junk, "--features", file("target_features.aclf"),
                     "--labels", file("target_labels.acll")})
                .code,
            kExitData);

  // Eval without labels is a usage error.
  const std::string out = (dir_->path() / "m").string();
  ASSERT_EQ(run_acl(train_args(out)).code, 0);
  EXPECT_EQ(run_acl({"eval", "--model", out + "/model.aclm", "--features",
                     file("target_features.aclf")})
                .code,
            kExitUsage);
  // Feature width mismatch between model and data: 3.
  const std::string wide = (dir_->path() / "wide").string();
  ASSERT_EQ(run_acl({"gen-synth", "--out-dir", wide, "--feature-dim", "9", "--source-classes",
                     "6", "--shared-classes", "3"})
                .code,
            0);
  EXPECT_EQ(run_acl({"predict", "--model", out + "/model.aclm", "--features",
                     wide + "/target_features.aclf", "--out", wide + "/p.csv"})
                .code,
            kExitData);
}

TEST(ErrorClasses, MapToDocumentedExitCodes) {
  EXPECT_EQ(classify_error(ConfigError("x")).exit_code, 2);
  EXPECT_EQ(classify_error(UsageError("x")).exit_code, 2);
  EXPECT_EQ(classify_error(FormatError("x")).exit_code, 3);
  EXPECT_EQ(classify_error(DataError("x")).exit_code, 3);
  EXPECT_EQ(classify_error(DimensionError("x")).exit_code, 3);
  EXPECT_EQ(classify_error(NumericError("x")).exit_code, 4);
}

}  // namespace
}  // namespace acl::cli
