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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"
#include "flowsiam/pipeline.hpp"
#include "json.hpp"

namespace flowsiam::pipeline {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void Emit(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

void ApplyThreads(const RunConfig& cfg) {
  if (cfg.threads > 0) SetMaxThreads(cfg.threads);
}

std::vector<sim::StreetProfile> SelectStreets(const std::vector<std::string>& names) {
  auto known = sim::EvaluationStreets();
  known.push_back(sim::TrainingStreet());
  std::vector<sim::StreetProfile> out;
  for (const auto& name : names) {
    const auto it = std::find_if(known.begin(), known.end(),
                                 [&](const sim::StreetProfile& s) { return s.street_id == name; });
    Require(it != known.end(), ErrorCode::kInvalidArgument, "unknown street '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo,
          "cannot open '" + path.string() + "' for writing");
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

std::string MethodTag(detect::SimilarityMetric m) {
  return m == detect::SimilarityMetric::kMseTanh ? "siamese-mse" : "siamese-cosine";
}


}  // namespace

Logger StderrLogger() {
  return [](std::string_view msg) { std::cerr << "[flowsiam] " << msg << '\n'; };
}

Corpora GenerateCorpora(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  Corpora c;
  sim::GeneratorConfig g = cfg.generator;
  if (cfg.split) {
    g.seed = DeriveSeed(cfg.seed, SeedStream::kTrainCorpus);
    g.streets = SelectStreets(cfg.evaluation.streets);
    g.abnormal_fraction = cfg.evaluation.abnormal_fraction;
    g.abnormal_kind_mix = cfg.evaluation.kind_mix;
    const Dataset pool = sim::GenerateDataset(g);
    DatasetSplit split = SplitDataset(pool, *cfg.split, DeriveSeed(cfg.seed, SeedStream::kSplit));
    c.train = std::move(split.train);
    c.calibration = std::move(split.calibration);
    c.test = std::move(split.test);
    c.warnings = std::move(split.warnings);
  } else {
    g.seed = DeriveSeed(cfg.seed, SeedStream::kTrainCorpus);
    g.abnormal_fraction = 0.0;
    g.flow_prefix = "train";
    c.train = sim::GenerateDataset(g);

    sim::GeneratorConfig e = cfg.generator;
    e.streets = SelectStreets(cfg.evaluation.streets);
    e.scenario_mix = {1.0, 0.0, 0.0};
    e.abnormal_fraction = cfg.evaluation.abnormal_fraction;
    e.abnormal_kind_mix = cfg.evaluation.kind_mix;
    e.seed = DeriveSeed(cfg.seed, SeedStream::kCalibrationCorpus);
    e.flows = cfg.evaluation.calibration_flows;
    e.flow_prefix = "cal";
    if (e.flows > 0) c.calibration = sim::GenerateDataset(e);
    e.seed = DeriveSeed(cfg.seed, SeedStream::kTestCorpus);
    e.flows = cfg.evaluation.test_flows;
    e.flow_prefix = "test";
    if (e.flows > 0) c.test = sim::GenerateDataset(e);
  }
  for (Dataset* d : {&c.calibration, &c.test}) {
    d->feature_spec = c.train.feature_spec;
    d->rate_hz = c.train.rate_hz;
    d->steps = c.train.steps;
  }
  Require(!c.train.flows.empty(), ErrorCode::kInvalidArgument, "training corpus is empty");
  const Normalization norm = FitNormalizer(c.train);
  for (Dataset* d : {&c.train, &c.calibration, &c.test}) {
    d->normalization = norm;
    ValidateDataset(*d);
  }
  return c;
}

Corpora CmdGenerate(const RunConfig& cfg, const std::string& out_dir, const Logger& log) {
  ApplyThreads(cfg);
  Corpora c = GenerateCorpora(cfg);
  for (const auto& w : c.warnings) Emit(log, "warning: " + w);
  fs::create_directories(out_dir);
  SaveDataset(c.train, (fs::path(out_dir) / "train.json").string());
  SaveDataset(c.calibration, (fs::path(out_dir) / "calibration.json").string());
  SaveDataset(c.test, (fs::path(out_dir) / "test.json").string());
  Emit(log, "generated " + std::to_string(c.train.flows.size()) + " train, " +
                std::to_string(c.calibration.flows.size()) + " calibration, " +
                std::to_string(c.test.flows.size()) + " test flows (" +
                std::to_string(c.train.TrajectoryCount()) + " training trajectories)");
  return c;
}

TrainOutput CmdTrain(const RunConfig& cfg, const std::string& train_path,
                     const std::string& model_out, const std::string& log_out,
                     const std::string& resume_model, const Logger& log) {
  ApplyThreads(cfg);
  ValidateRunConfig(cfg);
  const Dataset train = LoadDataset(train_path);
  for (const auto& f : train.flows)
    Require(f.label == Label::kNormal, ErrorCode::kInvalidArgument,
            "training input '" + train_path + "' contains abnormal flow '" + f.flow_id +
                "'; training uses normal flows only");

  siamese::SiameseAutoencoder model;
  if (!resume_model.empty()) {
    model = siamese::LoadModel(resume_model);
    Require(model.feature_spec == train.feature_spec, ErrorCode::kInvalidArgument,
            "resumed model feature_spec does not match the training data");
    Require(model.dims.steps == train.steps, ErrorCode::kShape,
            "resumed model T does not match the training data");
  } else {
    siamese::ModelDims dims;
    dims.d = train.feature_spec.size();
    dims.h1 = cfg.h1;
    dims.latent = cfg.latent.value_or(siamese::DefaultLatentSize(cfg.h1));
    dims.steps = train.steps;
    model = siamese::MakeModel(dims, DeriveSeed(cfg.seed, SeedStream::kModelInit));
    model.feature_spec = train.feature_spec;
    model.normalization = train.normalization ? *train.normalization : FitNormalizer(train);
  }
  siamese::TrainConfig tc = cfg.train;
  tc.seed = DeriveSeed(cfg.seed, SeedStream::kTrainShuffle) ^ model.epochs_trained;

  const auto start = Clock::now();
  TrainOutput out;
  out.result = siamese::Train(model, train, tc, [&](const siamese::TrainLogRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %zu  rloss %.6f  sim %.6f  total %.6f  (%.2fs)",
                  r.epoch, r.rloss, r.sim, r.total, r.seconds);
    Emit(log, buf);
  });
  out.seconds = SecondsSince(start);
  if (out.result.early_stopped)
    Emit(log, "early stop after epoch " + std::to_string(out.result.model.epochs_trained));

  siamese::SaveModel(out.result.model, model_out);
  if (!log_out.empty()) {
    const bool append = !resume_model.empty() && fs::exists(log_out);
    std::ofstream csv(log_out, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    Require(static_cast<bool>(csv), ErrorCode::kIo, "cannot open '" + log_out + "' for writing");
    siamese::WriteTrainLogCsv(out.result.log, csv, !append);
  }
  return out;
}

std::vector<detect::ScoredFlow> CmdScore(const std::string& model_path,
                                         const std::string& dataset_path,
                                         const detect::DetectorConfig& cfg,
                                         const std::string& out_path,
                                         std::optional<double> theta) {
  const auto model = siamese::LoadModel(model_path);
  const Dataset d = LoadDataset(dataset_path);
  if (theta)
    Require(*theta >= 0.0 && *theta <= 1.0, ErrorCode::kInvalidArgument,
            "theta must lie in [0, 1]");
  const auto scores = detect::ScoreDataset(model, d, cfg);
  detect::ThresholdPolicy policy;
  policy.common = theta;
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + out_path + "' for writing");
  detect::WriteJsonLines(scores, MethodTag(cfg.metric), theta ? &policy : nullptr, out);
  Require(static_cast<bool>(out), ErrorCode::kIo, "failed writing '" + out_path + "'");
  return scores;
}

std::vector<eval::MethodInput> BuildMethods(const RunConfig& cfg,
                                            const siamese::SiameseAutoencoder* model,
                                            const Dataset& calibration, const Logger& log) {
  const Normalization norm =
      calibration.normalization ? *calibration.normalization : FitNormalizer(calibration);
  std::vector<eval::MethodInput> methods;
  for (const auto& name : cfg.methods) {
    if (name == "siamese-mse" || name == "siamese-cosine") {
      Require(model != nullptr, ErrorCode::kInvalidArgument, name + " needs a trained model");
      detect::DetectorConfig dc = cfg.detector;
      dc.metric = name == "siamese-mse" ? detect::SimilarityMetric::kMseTanh
                                        : detect::SimilarityMetric::kCosine;
      methods.push_back({name, [model, dc](const Dataset& d) {
                           return detect::ScoreDataset(*model, d, dc);
                         }});
    } else if (name == "dtw") {
      const baselines::DtwConfig dtw = cfg.baselines.dtw;
      methods.push_back(
          {name, [norm, dtw](const Dataset& d) { return baselines::ScoreDatasetDtw(d, norm, dtw); }});
    } else if (name == "gak") {
      baselines::GakConfig gak;
      gak.sigma = cfg.baselines.gak_sigma;
      if (gak.sigma == 0.0) {
        std::vector<baselines::Series> flat;
        for (auto& flow : baselines::DatasetWindows(calibration, calibration.feature_spec, norm))
          for (auto& w : flow) flat.push_back(std::move(w));
        gak.sigma = baselines::MedianHeuristicSigma(flat);
        Emit(log, "gak sigma (median heuristic) = " + std::to_string(gak.sigma));
      }
      methods.push_back(
          {name, [norm, gak](const Dataset& d) { return baselines::ScoreDatasetGak(d, norm, gak); }});
    } else if (name == "iforest") {
      baselines::IForestConfig ic;
      ic.n_trees = cfg.baselines.iforest_trees;
      ic.subsample = cfg.baselines.iforest_subsample;
      ic.seed = DeriveSeed(cfg.seed, SeedStream::kIForest);
      methods.push_back(
          {name, [ic](const Dataset& d) { return baselines::ScoreDatasetIForest(d, ic); }});
    } else {
      Fail(ErrorCode::kInvalidArgument, "unknown method '" + name + "'");
    }
  }
  return methods;
}

eval::EvalReport CmdEvaluate(const RunConfig& cfg, const std::string& model_path,
                             const std::string& calibration_path, const std::string& test_path,
                             const std::string& out_dir, const Logger& log) {
  ApplyThreads(cfg);
  ValidateRunConfig(cfg);
  const bool needs_model =
      std::any_of(cfg.methods.begin(), cfg.methods.end(),
                  [](const std::string& m) { return m.rfind("siamese-", 0) == 0; });
  std::optional<siamese::SiameseAutoencoder> model;
  if (needs_model) model = siamese::LoadModel(model_path);
  const Dataset calibration = LoadDataset(calibration_path);
  const Dataset test = LoadDataset(test_path);
  const auto methods = BuildMethods(cfg, model ? &*model : nullptr, calibration, log);
  eval::EvalOptions options;
  options.per_street = cfg.per_street;
  eval::EvalReport report = eval::EvaluateMethods(calibration, test, methods, options);
  eval::WriteArtifacts(report, out_dir);
  for (const auto& m : report.methods) {
    if (!m.ok) {
      Emit(log, m.method + " failed: " + m.error);
      continue;
    }
    std::ofstream jl(fs::path(out_dir) / ("scores_" + m.method + ".jsonl"),
                     std::ios::binary | std::ios::trunc);
    Require(static_cast<bool>(jl), ErrorCode::kIo, "cannot write scores for " + m.method);
    detect::WriteJsonLines(m.test_scores, m.method, &m.policy, jl);
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-15s F1 %.4f  P %.4f  R %.4f  AUC %.4f  theta %.6g",
                  m.method.c_str(), m.prf.f1, m.prf.precision, m.prf.recall, m.roc.auc, m.theta);
    Emit(log, buf);
  }
  return report;
}

bool ReproOutput::passed() const {
  return std::all_of(bars.begin(), bars.end(), [](const Bar& b) { return b.passed; });
}

std::vector<Bar> CheckBars(const eval::EvalReport& report,
                           const std::vector<siamese::TrainLogRecord>& train_log) {
  std::vector<Bar> bars;
  char buf[256];
  const auto f1 = [&](const char* method) -> std::optional<double> {
    const eval::MethodReport* m = report.Find(method);
    if (m == nullptr || !m->ok) return std::nullopt;
    return m->prf.f1;
  };
  const auto mse = f1("siamese-mse");
  const auto compare = [&](const char* name, const char* other, bool strict) {
    const auto o = f1(other);
    Bar b{name, false, ""};
    if (!mse || !o) {
      b.detail = std::string("missing result for siamese-mse or ") + other;
    } else {
      b.passed = strict ? *mse > *o : *mse >= *o;
      std::snprintf(buf, sizeof(buf), "siamese-mse F1 %.4f %s %s F1 %.4f", *mse,
                    strict ? ">" : ">=", other, *o);
      b.detail = buf;
    }
    bars.push_back(b);
  };

  Bar floor{"detector_f1_floor", false, "missing result for siamese-mse"};
  if (mse) {
    floor.passed = *mse >= 0.70;
    std::snprintf(buf, sizeof(buf), "siamese-mse F1 %.4f >= 0.70", *mse);
    floor.detail = buf;
  }
  bars.push_back(floor);
  compare("beats_dtw", "dtw", true);
  compare("beats_iforest", "iforest", true);
  compare("mse_not_below_cosine", "siamese-cosine", false);

  Bar halving{"loss_halving", false, "training log is empty"};
  if (!train_log.empty()) {
    const std::size_t k = std::min<std::size_t>(50, train_log.size()) - 1;
    const double first = train_log.front().total;
    const double at = train_log[k].total;
    halving.passed = at < 0.5 * first;
    std::snprintf(buf, sizeof(buf), "total loss at epoch %zu = %.6g vs 0.5 * epoch %zu = %.6g",
                  train_log[k].epoch, at, train_log.front().epoch, 0.5 * first);
    halving.detail = buf;
  }
  bars.push_back(halving);

  Bar street{"per_street_dominance", false, "no per-street table for siamese-mse"};
  if (const auto* m = report.Find("siamese-mse"); m != nullptr && !m->per_street.empty()) {
    street.passed = true;
    street.detail.clear();
    for (const auto& row : m->per_street) {
      const bool ok = row.calibration_flows == 0 ||
                      row.f1_individual_calibration >= row.f1_common_calibration;
      street.passed = street.passed && ok;
      std::snprintf(buf, sizeof(buf), "%s%s individual %.4f vs common %.4f",
                    street.detail.empty() ? "" : "; ", row.street_id.c_str(),
                    row.f1_individual_calibration, row.f1_common_calibration);
      street.detail += buf;
    }
  }
  bars.push_back(street);
  return bars;
}

ReproOutput CmdRepro(const RunConfig& cfg, const std::string& out_dir, const Logger& log) {
  ValidateRunConfig(cfg);
  ApplyThreads(cfg);
  const auto start = Clock::now();
  const fs::path root(out_dir);
  Emit(log, "repro '" + cfg.experiment + "' seed " + std::to_string(cfg.seed) + " -> " +
                root.string());
  CmdGenerate(cfg, out_dir, log);
  WriteText(root / "config.toml", ConfigToText(cfg));
  const std::string log_path = (root / "train_log.csv").string();
  TrainOutput trained = CmdTrain(cfg, (root / "train.json").string(),
                                 (root / "model.json").string(), log_path, {}, log);
  Emit(log, "training took " + std::to_string(trained.seconds) + " s");

  ReproOutput out;
  out.report = CmdEvaluate(cfg, (root / "model.json").string(),
                           (root / "calibration.json").string(), (root / "test.json").string(),
                           out_dir, log);
  out.train_log = trained.result.log;
  out.bars = CheckBars(out.report, out.train_log);
  out.seconds = SecondsSince(start);

  nlohmann::ordered_json bars = nlohmann::ordered_json::array();
  for (const auto& b : out.bars) {
    bars.push_back({{"name", b.name}, {"passed", b.passed}, {"detail", b.detail}});
    Emit(log, std::string(b.passed ? "PASS " : "FAIL ") + b.name + ": " + b.detail);
  }
  nlohmann::ordered_json doc;
  doc["experiment"] = cfg.experiment;
  doc["seed"] = cfg.seed;
  doc["passed"] = out.passed();
  doc["bars"] = bars;
  doc["epochs_trained"] = trained.result.model.epochs_trained;
  doc["train_seconds"] = trained.seconds;
  doc["total_seconds"] = out.seconds;
  WriteText(root / "acceptance.json", doc.dump(2) + "\n");
  return out;
}

}  // namespace flowsiam::pipeline
