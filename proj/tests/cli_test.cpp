// Copyright 2026 The FedFair Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "config.hpp"
#include "fedfair/error.hpp"
#include "fedfair/serialization.hpp"

namespace fedfair::tools {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSmallConfig = R"({
  "seed": 3,
  "data": {"generator": {"samples": 600, "features": 3,
                         "group_b": {"proportion": 0.5, "flip_rate": 0.2, "shift": 1.0}}},
  "clients": {"count": 4, "batch_size": 16},
  "model": {"hidden_dims": [4]},
  "plan": {"rounds": 10},
  "condensation": {"samples": 50, "iterations": 10, "data_lr": 100}
})";

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedfair_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

MetricTrace read_csv_file(const fs::path& path) {
  std::ifstream in(path);
  return read_trace_csv(in);
}

TEST_F(CliTest, DefaultConfigRunWritesOneRowPerRound) {
  const auto r = cli({"run", "--config", FEDFAIR_CONFIG_DIR "/default.json", "--out", out("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto trace = read_csv_file(dir_ / "run" / "trace.csv");
  ASSERT_EQ(trace.size(), 60u);
  EXPECT_EQ(trace.back().round, 60u);
  EXPECT_EQ(trace[29].phase, RoundPhase::kCollect);
  EXPECT_EQ(trace[30].phase, RoundPhase::kCalibrate);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "model.json"));
}

TEST_F(CliTest, JsonlFormatAndSeedOverride) {
  const auto cfg = write("small.json", kSmallConfig);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", out("a"), "--format", "jsonl"}).code, 0);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", out("b"), "--seed", "4"}).code, 0);
  std::ifstream in(dir_ / "a" / "trace.jsonl");
  const auto a = read_trace_jsonl(in);
  const auto b = read_csv_file(dir_ / "b" / "trace.csv");
  ASSERT_EQ(a.size(), 10u);
  ASSERT_EQ(b.size(), 10u);
  EXPECT_NE(a, b);
}

TEST_F(CliTest, SweepWritesTraceAndSummaryPerValue) {
  const auto cfg = write("small.json", kSmallConfig);
  const auto r = cli({"sweep", "gamma", "0,0.5,1,2", "--config", cfg, "--out", out("sweep")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream summary(dir_ / "sweep" / "summary.csv");
  std::string line;
  std::getline(summary, line);
  EXPECT_EQ(line, kSummaryHeader);
  std::vector<std::string> rows;
  while (std::getline(summary, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);

  const std::vector<std::pair<double, std::string>> points = {
      {0.0, "trace_gamma_0.csv"}, {0.5, "trace_gamma_0.5.csv"},
      {1.0, "trace_gamma_1.csv"}, {2.0, "trace_gamma_2.csv"}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto trace = read_csv_file(dir_ / "sweep" / points[i].second);
    ASSERT_EQ(trace.size(), 10u);
    EXPECT_EQ(trace.back().gamma, points[i].first);
    std::ostringstream expected;
    write_summary_csv(expected, {summarize("gamma", points[i].first, points[i].second, trace)});
    EXPECT_EQ(std::string(kSummaryHeader) + "\n" + rows[i] + "\n", expected.str());
  }
}

TEST_F(CliTest, SweepRejectsUnusableValuesWithoutLeavingFiles) {
  const auto cfg = write("small.json", kSmallConfig);
  const auto r = cli({"sweep", "round_fraction", "0.5,1.5", "--config", cfg, "--out", out("s")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("round_fraction"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "s"));
  EXPECT_EQ(cli({"sweep", "lr", "1", "--config", cfg, "--out", out("s")}).code, 2);
}

TEST_F(CliTest, DatasynWritesRequestedSampleCount) {
  const auto cfg = write("small.json", kSmallConfig);
  const auto r = cli({"datasyn", "--config", cfg, "--out", out("syn")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir_ / "syn" / "synthetic.csv");
  const auto syn = data::read_dataset_csv(in);
  EXPECT_EQ(syn.size(), 50u);
  EXPECT_EQ(syn.features.cols(), 4u);
}

TEST_F(CliTest, MetricsOnSymmetricFixtureAreZero) {
  const auto r = cli({"metrics", "--model", FEDFAIR_FIXTURE_DIR "/symmetric_model.json", "--data",
                      FEDFAIR_FIXTURE_DIR "/symmetric_groups.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "metric,value\neo,0\ndp,0\ncal,0\ncon,0\naccuracy,0.75\n");
}

TEST_F(CliTest, MetricsReportsMissingInputs) {
  const auto r = cli({"metrics", "--model", out("none.json"), "--data",
                      FEDFAIR_FIXTURE_DIR "/symmetric_groups.csv"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("none.json"), std::string::npos) << r.err;
}

TEST_F(CliTest, ConfigErrorsNameTheFieldAndRemoveOutputs) {
  const auto bad_key = write("bad_key.json", R"({"data": {"generator": {}}, "clients": {"lr": 0.1}})");
  auto r = cli({"run", "--config", bad_key, "--out", out("r1")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/clients/lr"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "r1"));

  const auto big_batch = write("big_batch.json", R"({
    "data": {"generator": {"samples": 100}}, "clients": {"count": 10, "batch_size": 32}})");
  r = cli({"run", "--config", big_batch, "--out", out("r2")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/clients/batch_size"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "r2"));

  const auto syntax = write("syntax.json", "{\"data\": ");
  EXPECT_EQ(cli({"run", "--config", syntax, "--out", out("r3")}).code, 2);
  EXPECT_EQ(cli({"run", "--config", out("missing.json")}).code, 2);
  EXPECT_EQ(cli({"run"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
}

TEST(Config, RejectsInvalidFields) {
  const auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(field_of(R"({"clients": {}})"), "/data");
  EXPECT_EQ(field_of(R"({"data": {"generator": {}}, "plan": {"rounds": 4, "checkpoint_rounds": 4}})"),
            "/plan/checkpoint_rounds");
  EXPECT_EQ(field_of(R"({"data": {"generator": {}}, "plan": {"calibrator": "magic"}})"),
            "/plan/calibrator");
  EXPECT_EQ(field_of(R"({"data": {"generator": {}}, "schedules": {"eta": {"constant": 0}}})"),
            "/schedules/eta");
  EXPECT_EQ(field_of(R"({"data": {"generator": {}}, "clients": {"dp": {"sigma": -1}}})"),
            "/clients/dp");
  EXPECT_EQ(field_of(R"({"data": {"generator": {}}, "seed": "one"})"), "/seed");
  EXPECT_EQ(field_of(R"({"data": {"generator": {}}})"), "<accepted>");
}

TEST(Config, PublishedDefaults) {
  const auto c = parse_config(R"({"data": {"generator": {}}, "plan": {"rounds": 40},
                                  "clients": {"dp": {"sigma": 0.1}}})");
  EXPECT_EQ(c.condensation.samples, 1000u);
  EXPECT_EQ(c.clients.dp->clip_norm, 0.05);
  EXPECT_EQ(std::get<federation::ConstantRate>(c.schedules.gamma).value, 1.0);
  EXPECT_EQ(c.plan.noise_scale, 2.0);
  EXPECT_EQ(c.plan.checkpoint_rounds, 20u);
}

TEST(Config, SeedDrivesEveryDerivedSeed) {
  auto c = parse_config(R"({"data": {"generator": {"samples": 200}}, "clients": {"count": 2}})");
  apply_seed(c, 42);
  const auto p = prepare(c);
  EXPECT_EQ(p.setup.plan.seed, 42u);
  EXPECT_EQ(p.setup.condensation.seed, 42u);
  EXPECT_EQ(p.clients[1].seed, 42001u);
  EXPECT_EQ(p.setup.initial, ModelParams::xavier(p.setup.initial.shape(), 42));
  apply_seed(c, 43);
  EXPECT_NE(prepare(c).eval, p.eval);
}

TEST(Config, AggregatorObjectForm) {
  const auto c = parse_config(R"({"data": {"generator": {}},
      "plan": {"aggregator": {"kind": "trimmed_mean", "trim": 2}}})");
  EXPECT_EQ(std::get<aggregation::TrimmedMean>(c.plan.aggregator).trim, 2u);
}

}  // namespace
}  // namespace fedfair::tools
