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

// Command-line front end over the C interface.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowsiam/flowsiam.h"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t threads = 0;
  bool quiet = false;
  std::optional<std::uint64_t> seed;
};

int Report(fs_status s) {
  if (s == FS_OK) return 0;
  std::fprintf(stderr, "flowsiam: %s: %s\n", fs_status_string(s), fs_last_error());
  return s == FS_ERR_BARS_FAILED ? 2 : 1;
}

class ConfigHandle {
 public:
  ~ConfigHandle() { fs_config_free(cfg_); }
  fs_config* get() const { return cfg_; }

  fs_status Build(const Common& common) {
    fs_status s = common.config_path.empty() ? fs_config_default(&cfg_)
                                             : fs_config_load(common.config_path.c_str(), &cfg_);
    if (s != FS_OK) return s;
    if ((s = fs_config_apply_env(cfg_)) != FS_OK) return s;
    for (const auto& kv : common.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "flowsiam: --set expects key=value, got '%s'\n", kv.c_str());
        return FS_ERR_INVALID_ARGUMENT;
      }
      s = fs_config_set(cfg_, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
      if (s != FS_OK) return s;
    }
    if (common.seed) {
      s = fs_config_set(cfg_, "experiment.seed", std::to_string(*common.seed).c_str());
      if (s != FS_OK) return s;
    }
    if (common.threads > 0)
      return fs_config_set(cfg_, "experiment.threads", std::to_string(common.threads).c_str());
    return FS_OK;
  }

  fs_status Set(const char* key, const std::string& value) {
    return fs_config_set(cfg_, key, value.c_str());
  }

 private:
  fs_config* cfg_ = nullptr;
};

std::string Quoted(const std::string& s) { return "\"" + s + "\""; }

std::string ListValue(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + Quoted(items[i]);
  return out + "]";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleet trajectory anomaly detection with a siamese LSTM autoencoder"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fs_version()));

  Common common;
  app.add_option("--config", common.config_path, "Run configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Override a config key, e.g. train.epochs_max=100");
  app.add_option("--threads", common.threads, "Maximum worker threads (0 = all cores)");
  app.add_option("--seed", common.seed, "Global seed (overrides config and FLOWSIAM_SEED)");
  app.add_flag("-q,--quiet", common.quiet, "Suppress progress messages");

  auto* gen = app.add_subcommand("generate", "Write train, calibration and test datasets");
  std::string gen_out;
  std::optional<std::size_t> gen_flows;
  std::optional<std::size_t> gen_fleet;
  gen->add_option("-o,--out", gen_out, "Output directory")->required();
  gen->add_option("--flows", gen_flows, "Training fleets");
  gen->add_option("--fleet", gen_fleet, "Vehicles per fleet");

  auto* train = app.add_subcommand("train", "Train the autoencoder on normal fleets");
  std::string train_data;
  std::string train_model;
  std::string train_log;
  std::string train_resume;
  std::optional<std::size_t> train_epochs;
  train->add_option("--train", train_data, "Training dataset")->required()->check(CLI::ExistingFile);
  train->add_option("-m,--model", train_model, "Model output path")->required();
  train->add_option("--log", train_log, "Training log CSV (default: next to the model)");
  train->add_option("--resume", train_resume, "Continue training this model")
      ->check(CLI::ExistingFile);
  train->add_option("--epochs", train_epochs, "Maximum epochs for this run");

  auto* score = app.add_subcommand("score", "Score every flow of a dataset");
  std::string score_model;
  std::string score_data;
  std::string score_out;
  std::string score_metric = "mse";
  std::string score_mode = "canonical";
  std::optional<double> score_theta;
  score->add_option("-m,--model", score_model, "Trained model")->required()->check(CLI::ExistingFile);
  score->add_option("-d,--dataset", score_data, "Dataset")->required()->check(CLI::ExistingFile);
  score->add_option("-o,--out", score_out, "JSON-lines output")->required();
  score->add_option("--metric", score_metric, "Latent similarity")
      ->check(CLI::IsMember({"mse", "cosine"}));
  score->add_option("--score-mode", score_mode, "Score aggregation")
      ->check(CLI::IsMember({"canonical", "paper-eq4"}));
  score->add_option("--theta", score_theta, "Threshold for decisions");

  auto* evaluate = app.add_subcommand("evaluate", "Calibrate thresholds and evaluate methods");
  std::string eval_model;
  std::string eval_cal;
  std::string eval_test;
  std::string eval_out;
  bool eval_per_street = false;
  std::vector<std::string> eval_methods;
  evaluate->add_option("-m,--model", eval_model, "Trained model");
  evaluate->add_option("--calibration", eval_cal, "Calibration dataset")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--test", eval_test, "Test dataset")->required()->check(CLI::ExistingFile);
  evaluate->add_option("-o,--out", eval_out, "Output directory")->required();
  evaluate->add_flag("--per-street", eval_per_street, "Include the per-street threshold study");
  evaluate->add_option("--methods", eval_methods,
                       "Subset of siamese-mse, siamese-cosine, dtw, gak, iforest");

  auto* repro = app.add_subcommand("repro", "Generate, train, calibrate and evaluate in one run");
  std::string repro_out;
  repro->add_option("-o,--out", repro_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  fs_set_verbose(common.quiet ? 0 : 1);
  if (common.threads > 0) fs_set_max_threads(common.threads);
  ConfigHandle cfg;
  if (fs_status s = cfg.Build(common); s != FS_OK) return Report(s);

  if (*gen) {
    if (gen_flows) {
      if (fs_status s = cfg.Set("generator.flows", std::to_string(*gen_flows)); s != FS_OK)
        return Report(s);
    }
    if (gen_fleet) {
      if (fs_status s = cfg.Set("generator.fleet_size", std::to_string(*gen_fleet)); s != FS_OK)
        return Report(s);
    }
    return Report(fs_cmd_generate(cfg.get(), gen_out.c_str()));
  }
  if (*train) {
    if (train_epochs) {
      if (fs_status s = cfg.Set("train.epochs_max", std::to_string(*train_epochs)); s != FS_OK)
        return Report(s);
    }
    if (train_log.empty())
      train_log = (std::filesystem::path(train_model).parent_path() / "train_log.csv").string();
    return Report(fs_cmd_train(cfg.get(), train_data.c_str(), train_model.c_str(),
                               train_log.c_str(),
                               train_resume.empty() ? nullptr : train_resume.c_str()));
  }
  if (*score) {
    return Report(fs_cmd_score(score_model.c_str(), score_data.c_str(), score_metric.c_str(),
                               score_mode.c_str(), score_out.c_str(),
                               score_theta ? &*score_theta : nullptr));
  }
  if (*evaluate) {
    if (fs_status s = cfg.Set("detector.per_street", eval_per_street ? "true" : "false");
        s != FS_OK)
      return Report(s);
    if (!eval_methods.empty()) {
      if (fs_status s = cfg.Set("evaluate.methods", ListValue(eval_methods)); s != FS_OK)
        return Report(s);
    }
    return Report(fs_cmd_evaluate(cfg.get(), eval_model.empty() ? nullptr : eval_model.c_str(),
                                  eval_cal.c_str(), eval_test.c_str(), eval_out.c_str()));
  }
  if (*repro) {
    if (repro_out.empty()) {
      std::size_t needed = 0;
      if (fs_status s = fs_config_get(cfg.get(), "experiment.output_dir", nullptr, 0, &needed);
          s != FS_OK)
        return Report(s);
      std::string dir(needed, '\0');
      if (fs_status s = fs_config_get(cfg.get(), "experiment.output_dir", dir.data(), needed,
                                      &needed);
          s != FS_OK)
        return Report(s);
      repro_out = dir.c_str();
    }
    return Report(fs_cmd_repro(cfg.get(), repro_out.c_str()));
  }
  return 0;
}
