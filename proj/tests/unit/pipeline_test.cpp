/*
 * Copyright 2026 The flowsiam Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "flowsiam/pipeline.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace flowsiam;
using namespace flowsiam::pipeline;
using flowsiam::testing::CodeOf;
namespace fs = std::filesystem;

namespace {

RunConfig TinyConfig() {
  RunConfig cfg = DeskConfig();
  cfg.seed = 5;
  cfg.generator.flows = 6;
  cfg.generator.steps = 10;
  cfg.generator.fleet_size = 3;
  cfg.evaluation.calibration_flows = 8;
  cfg.evaluation.test_flows = 12;
  cfg.evaluation.abnormal_fraction = 0.25;
  cfg.h1 = 4;
  cfg.train.epochs_max = 3;
  cfg.train.batch_flows = 3;
  cfg.baselines.iforest_trees = 20;
  cfg.baselines.iforest_subsample = 16;
  return cfg;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> ReadLines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config text round trip and overrides") {
    const RunConfig base = DeskConfig();
    CHECK(ConfigToText(ParseConfig(ConfigToText(base))) == ConfigToText(base));

    const auto cfg = ParseConfig(
        "# experiment settings\n"
        "[experiment]\nname = \"trial\"\nseed = 7\n\n"
        "[generator]\nflows = 12\nfeature_spec = [\"x\", \"speed\"]\n"
        "; model width\n[model]\nh1 = 16\n"
        "[detector]\nmetric = \"cosine\"\nper_street = false\n"
        "[evaluate]\nmethods = [\"dtw\", \"iforest\"]\n");
    CHECK(cfg.experiment == "trial");
    CHECK(cfg.seed == 7);
    CHECK(cfg.generator.flows == 12);
    CHECK(cfg.generator.feature_spec == FeatureSpec{"x", "speed"});
    CHECK(cfg.h1 == 16);
    CHECK(cfg.detector.metric == detect::SimilarityMetric::kCosine);
    CHECK_FALSE(cfg.per_street);
    CHECK(cfg.methods == std::vector<std::string>{"dtw", "iforest"});
    CHECK(cfg.generator.fleet_size == base.generator.fleet_size);

    CHECK(CodeOf([] { ParseConfig("[generator]\nflowz = 3\n"); }) == ErrorCode::kParse);
    CHECK(CodeOf([] { ParseConfig("[nowhere]\nx = 1\n"); }) == ErrorCode::kParse);
    CHECK(CodeOf([] { ParseConfig("[generator]\nflows = many\n"); }) == ErrorCode::kParse);

    RunConfig edited = base;
    SetConfigValue(edited, "train.lr", "0.005");
    CHECK(edited.train.lr == 0.005);
    CHECK(GetConfigValue(edited, "experiment.output_dir") == base.output_dir);
    CHECK(CodeOf([&] { GetConfigValue(edited, "train.speed"); }) == ErrorCode::kParse);
  }

  TEST_CASE("validation") {
    RunConfig cfg = DeskConfig();
    CHECK_NOTHROW(ValidateRunConfig(cfg));
    cfg.methods = {"svm"};
    CHECK(CodeOf([&] { ValidateRunConfig(cfg); }) == ErrorCode::kInvalidArgument);
    cfg = DeskConfig();
    cfg.evaluation.streets = {"path9"};
    CHECK(CodeOf([&] { ValidateRunConfig(cfg); }) == ErrorCode::kInvalidArgument);
    cfg = DeskConfig();
    cfg.latent = 10000;
    CHECK(CodeOf([&] { ValidateRunConfig(cfg); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("seed environment override") {
    RunConfig cfg = DeskConfig();
    ::setenv(kSeedEnv, "1234", 1);
    ApplySeedOverride(cfg);
    CHECK(cfg.seed == 1234);
    ::setenv(kSeedEnv, "12x", 1);
    CHECK(CodeOf([&] { ApplySeedOverride(cfg); }) == ErrorCode::kParse);
    ::unsetenv(kSeedEnv);
    cfg.seed = 3;
    ApplySeedOverride(cfg);
    CHECK(cfg.seed == 3);
  }

  TEST_CASE("derived seeds are distinct per stream") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s <= 6; ++s) seen.insert(DeriveSeed(42, static_cast<SeedStream>(s)));
    CHECK(seen.size() == 7);
    CHECK(DeriveSeed(42, SeedStream::kModelInit) == DeriveSeed(42, SeedStream::kModelInit));
    CHECK(DeriveSeed(43, SeedStream::kModelInit) != DeriveSeed(42, SeedStream::kModelInit));
  }

  TEST_CASE("generate writes identical files for the same seed") {
    const RunConfig cfg = TinyConfig();
    const auto a = flowsiam::testing::ScratchDir("pipeline_gen_a");
    const auto b = flowsiam::testing::ScratchDir("pipeline_gen_b");
    const auto corpora = CmdGenerate(cfg, a.string());
    CmdGenerate(cfg, b.string());
    for (const char* f : {"train.json", "calibration.json", "test.json"})
      CHECK(ReadFile(a / f) == ReadFile(b / f));
    for (const auto& f : corpora.train.flows) CHECK(f.label == Label::kNormal);
    CHECK(corpora.calibration.flows.size() == 8);
    CHECK(corpora.test.flows.size() == 12);
    CHECK(corpora.train.normalization == corpora.test.normalization);
    CHECK(corpora.train.normalization == corpora.calibration.normalization);
    for (const auto& f : corpora.test.flows) CHECK(f.street_id.rfind("path", 0) == 0);

    RunConfig big = TinyConfig();
    big.generator.flows = 1332;
    big.generator.fleet_size = 5;
    big.generator.steps = 2;
    big.latent = 1;
    CHECK(GenerateCorpora(big).train.TrajectoryCount() == 6660);
  }

  TEST_CASE("train, resume, score and evaluate") {
    RunConfig cfg = TinyConfig();
    const auto dir = flowsiam::testing::ScratchDir("pipeline_flow");
    const auto corpora = CmdGenerate(cfg, dir.string());
    const std::string train = (dir / "train.json").string();
    const std::string model = (dir / "model.json").string();
    const std::string log = (dir / "train_log.csv").string();

    const auto first = CmdTrain(cfg, train, model, log);
    CHECK(first.result.model.epochs_trained == 3);
    const auto again = CmdTrain(cfg, train, (dir / "model2.json").string(),
                                (dir / "log2.csv").string());
    CHECK(ReadFile(model) == ReadFile(dir / "model2.json"));

    const auto resumed = CmdTrain(cfg, train, model, log, model);
    CHECK(resumed.result.model.epochs_trained == 6);
    std::ifstream csv(log);
    std::vector<std::string> lines;
    for (std::string line; std::getline(csv, line);) lines.push_back(line);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0] == "epoch,rloss,sim,total,seconds");
    for (std::size_t k = 1; k < 7; ++k) CHECK(lines[k].rfind(std::to_string(k) + ",", 0) == 0);

    // Abnormal flows in training input abort before any output is written.
    Dataset poisoned = corpora.calibration;
    SaveDataset(poisoned, (dir / "poisoned.json").string());
    CHECK(CodeOf([&] {
            CmdTrain(cfg, (dir / "poisoned.json").string(), (dir / "bad_model.json").string(),
                     (dir / "bad_log.csv").string());
          }) == ErrorCode::kInvalidArgument);
    CHECK_FALSE(fs::exists(dir / "bad_model.json"));
    CHECK_FALSE(fs::exists(dir / "bad_log.csv"));

    const std::string test = (dir / "test.json").string();
    const auto canon = CmdScore(model, test, {}, (dir / "canon.jsonl").string());
    const auto flipped = CmdScore(model, test, {detect::SimilarityMetric::kMseTanh,
                                            detect::ScoreMode::kPaperEq4},
                              (dir / "flipped.jsonl").string(), 0.9);
    REQUIRE(canon.size() == 12);
    for (std::size_t i = 0; i < canon.size(); ++i)
      CHECK(flipped[i].score == doctest::Approx(1.0 - canon[i].score / 2.0).epsilon(1e-14));
    const auto lines_canon = ReadLines(dir / "canon.jsonl");
    const auto lines_flipped = ReadLines(dir / "flipped.jsonl");
    CHECK(lines_canon[0]["decision"].is_null());
    CHECK(lines_flipped[0]["theta"] == 0.9);
    CmdScore(model, test, {}, (dir / "canon2.jsonl").string());
    auto strip = [](std::vector<nlohmann::json> v) {
      for (auto& j : v) j.erase("millis");
      return v;
    };
    CHECK(strip(lines_canon) == strip(ReadLines(dir / "canon2.jsonl")));

    cfg.per_street = true;
    const auto report = CmdEvaluate(cfg, model, (dir / "calibration.json").string(), test,
                                    (dir / "eval").string());
    CHECK(report.methods.size() == cfg.methods.size());
    for (const auto& m : report.methods) {
      CHECK_MESSAGE(m.ok, m.method, ": ", m.error);
      CHECK(m.counts.total() == 12);
      CHECK(fs::exists(dir / "eval" / ("scores_" + m.method + ".jsonl")));
    }
    const auto j = nlohmann::json::parse(ReadFile(dir / "eval" / "report.json"));
    CHECK_FALSE(j["methods"][0]["per_street"].empty());

    cfg.per_street = false;
    const auto flat = CmdEvaluate(cfg, model, (dir / "calibration.json").string(), test,
                                  (dir / "eval_flat").string());
    for (const auto& m : flat.methods) CHECK(m.per_street.empty());
  }

  TEST_CASE("acceptance bars on a synthetic report") {
    eval::EvalReport report;
    auto add = [&](const std::string& name, double f1) {
      eval::MethodReport m;
      m.method = name;
      m.ok = true;
      m.prf.f1 = f1;
      report.methods.push_back(m);
    };
    add("siamese-mse", 0.8);
    add("siamese-cosine", 0.7);
    add("dtw", 0.6);
    add("gak", 0.3);
    add("iforest", 0.5);
    eval::StreetRow row;
    row.street_id = "path1";
    row.f1_individual_calibration = 0.9;
    row.f1_common_calibration = 0.8;
    report.methods[0].per_street.push_back(row);
    std::vector<siamese::TrainLogRecord> log;
    for (std::size_t e = 1; e <= 60; ++e) log.push_back({e, 0, 0, 1.0 / e, 0});
    auto bars = CheckBars(report, log);
    for (const auto& b : bars) CHECK_MESSAGE(b.passed, b.name, " ", b.detail);

    report.methods[0].prf.f1 = 0.65;
    bars = CheckBars(report, log);
    const auto floor = std::find_if(bars.begin(), bars.end(),
                                    [](const Bar& b) { return b.name == "detector_f1_floor"; });
    REQUIRE(floor != bars.end());
    CHECK_FALSE(floor->passed);
    const auto cos = std::find_if(bars.begin(), bars.end(),
                                  [](const Bar& b) { return b.name == "mse_not_below_cosine"; });
    REQUIRE(cos != bars.end());
    CHECK_FALSE(cos->passed);

    for (auto& r : log) r.total = 1.0;
    bars = CheckBars(report, log);
    const auto halving = std::find_if(bars.begin(), bars.end(),
                                      [](const Bar& b) { return b.name == "loss_halving"; });
    REQUIRE(halving != bars.end());
    CHECK_FALSE(halving->passed);
  }
}
