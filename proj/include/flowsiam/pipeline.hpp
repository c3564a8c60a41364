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

// Config-driven batch commands: generate, train, score, evaluate, repro.

#ifndef FLOWSIAM_PIPELINE_HPP_
#define FLOWSIAM_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowsiam/baselines.hpp"
#include "flowsiam/compressor.hpp"
#include "flowsiam/detector.hpp"
#include "flowsiam/eval.hpp"
#include "flowsiam/simgen.hpp"

namespace flowsiam::pipeline {

inline constexpr const char* kSeedEnv = "FLOWSIAM_SEED";

struct EvaluationCorpus {
  std::size_t calibration_flows = 60;
  std::size_t test_flows = 240;
  double abnormal_fraction = 0.15;
  sim::AnomalyMix kind_mix;
  std::vector<std::string> streets = {"path1", "path2", "path3", "path4"};
};

struct BaselineConfig {
  baselines::DtwConfig dtw;
  double gak_sigma = 0.0;  // 0 selects the median heuristic on calibration data
  std::size_t iforest_trees = 100;
  std::size_t iforest_subsample = 256;
};

struct RunConfig {
  std::string experiment = "desk";
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  sim::GeneratorConfig generator;
  EvaluationCorpus evaluation;
  std::optional<SplitFractions> split;  // one pooled corpus split three ways
  std::size_t h1 = 32;
  std::optional<std::size_t> latent;  // defaults to round(0.4 h1)
  siamese::TrainConfig train;
  detect::DetectorConfig detector;
  bool per_street = true;
  BaselineConfig baselines;
  std::vector<std::string> methods = {"siamese-mse", "siamese-cosine", "dtw", "gak", "iforest"};
  std::size_t threads = 0;  // 0 = hardware concurrency
};

// Defaults of the desk experiment: 300 normal training fleets, 60 + 240
// evaluation fleets on four streets, speed-only features.
RunConfig DeskConfig();

// Sectioned key = value document. Unknown sections or keys are errors.
RunConfig ParseConfig(std::string_view text, RunConfig base = DeskConfig());
RunConfig LoadConfig(const std::string& path);
// key is "section.name"; value uses config syntax.
void SetConfigValue(RunConfig& cfg, const std::string& key, const std::string& value);
// Value in config syntax, strings unquoted.
std::string GetConfigValue(const RunConfig& cfg, const std::string& key);
// Reads FLOWSIAM_SEED if set.
void ApplySeedOverride(RunConfig& cfg);
void ValidateRunConfig(const RunConfig& cfg);
std::string ConfigToText(const RunConfig& cfg);

// Stream seeds derived from the global seed.
enum class SeedStream : std::uint64_t {
  kTrainCorpus = 0,
  kCalibrationCorpus = 1,
  kTestCorpus = 2,
  kModelInit = 3,
  kTrainShuffle = 4,
  kIForest = 5,
  kSplit = 6,
};
std::uint64_t DeriveSeed(std::uint64_t seed, SeedStream stream);

using Logger = std::function<void(std::string_view)>;
Logger StderrLogger();

struct Corpora {
  Dataset train;
  Dataset calibration;
  Dataset test;
  std::vector<std::string> warnings;
};

Corpora GenerateCorpora(const RunConfig& cfg);
// Writes train.json, calibration.json and test.json under out_dir.
Corpora CmdGenerate(const RunConfig& cfg, const std::string& out_dir, const Logger& log = {});

struct TrainOutput {
  siamese::TrainResult result;
  double seconds = 0.0;
};

// Trains a fresh model, or continues `resume_model` when non-empty. The log
// CSV is appended to when resuming.
TrainOutput CmdTrain(const RunConfig& cfg, const std::string& train_path,
                     const std::string& model_out, const std::string& log_out,
                     const std::string& resume_model = {}, const Logger& log = {});

// JSON-lines scores of every flow. With theta, decisions are included.
std::vector<detect::ScoredFlow> CmdScore(const std::string& model_path,
                                         const std::string& dataset_path,
                                         const detect::DetectorConfig& cfg,
                                         const std::string& out_path,
                                         std::optional<double> theta = std::nullopt);

std::vector<eval::MethodInput> BuildMethods(const RunConfig& cfg,
                                            const siamese::SiameseAutoencoder* model,
                                            const Dataset& calibration,
                                            const Logger& log = {});

eval::EvalReport CmdEvaluate(const RunConfig& cfg, const std::string& model_path,
                             const std::string& calibration_path, const std::string& test_path,
                             const std::string& out_dir, const Logger& log = {});

struct Bar {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ReproOutput {
  eval::EvalReport report;
  std::vector<Bar> bars;
  std::vector<siamese::TrainLogRecord> train_log;
  double seconds = 0.0;
  bool passed() const;
};

// The acceptance bars of the desk experiment evaluated on a finished run.
std::vector<Bar> CheckBars(const eval::EvalReport& report,
                           const std::vector<siamese::TrainLogRecord>& train_log);

// generate -> train -> calibrate -> evaluate under out_dir, plus
// acceptance.json with the bars.
ReproOutput CmdRepro(const RunConfig& cfg, const std::string& out_dir, const Logger& log = {});

}  // namespace flowsiam::pipeline

#endif  // FLOWSIAM_PIPELINE_HPP_
