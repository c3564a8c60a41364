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

#include "flowsiam/flowsiam.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"
#include "flowsiam/pipeline.hpp"

struct fs_config {
  flowsiam::pipeline::RunConfig value;
};

struct fs_dataset {
  flowsiam::Dataset value;
};

struct fs_model {
  flowsiam::siamese::SiameseAutoencoder value;
};

namespace {

thread_local std::string g_last_error;
bool g_verbose = false;

fs_status ToStatus(flowsiam::ErrorCode code) {
  using flowsiam::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return FS_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return FS_ERR_IO;
    case ErrorCode::kParse: return FS_ERR_PARSE;
    case ErrorCode::kVersion: return FS_ERR_VERSION;
    case ErrorCode::kShape: return FS_ERR_SHAPE;
    case ErrorCode::kNumeric: return FS_ERR_NUMERIC;
    case ErrorCode::kState: return FS_ERR_STATE;
    case ErrorCode::kInternal: return FS_ERR_INTERNAL;
  }
  return FS_ERR_INTERNAL;
}

template <typename Fn>
fs_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const flowsiam::Error& e) {
    g_last_error = e.what();
    return ToStatus(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FS_ERR_INTERNAL;
  }
}

fs_status NullArg(const char* what) {
  g_last_error = std::string(what) + " is NULL";
  return FS_ERR_NULL_ARGUMENT;
}

flowsiam::pipeline::Logger Log() {
  return g_verbose ? flowsiam::pipeline::StderrLogger() : flowsiam::pipeline::Logger{};
}

fs_status CopyOut(const std::string& text, char* buf, size_t cap, size_t* needed) {
  if (needed != nullptr) *needed = text.size() + 1;
  if (buf == nullptr) return FS_OK;
  if (cap < text.size() + 1) {
    g_last_error =
        "buffer holds " + std::to_string(cap) + " bytes, need " + std::to_string(text.size() + 1);
    return FS_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return FS_OK;
}

std::string Str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

}  // namespace

extern "C" {

const char* fs_version(void) { return FLOWSIAM_VERSION_STRING; }

const char* fs_status_string(fs_status status) {
  switch (status) {
    case FS_OK: return "ok";
    case FS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FS_ERR_IO: return "i/o error";
    case FS_ERR_PARSE: return "parse error";
    case FS_ERR_VERSION: return "unsupported format version";
    case FS_ERR_SHAPE: return "shape mismatch";
    case FS_ERR_NUMERIC: return "numeric error";
    case FS_ERR_STATE: return "invalid state";
    case FS_ERR_INTERNAL: return "internal error";
    case FS_ERR_NULL_ARGUMENT: return "null argument";
    case FS_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case FS_ERR_BARS_FAILED: return "acceptance bars failed";
  }
  return "unknown status";
}

const char* fs_last_error(void) { return g_last_error.c_str(); }

void fs_set_max_threads(size_t n) { flowsiam::SetMaxThreads(n); }

void fs_set_verbose(int on) { g_verbose = on != 0; }

fs_status fs_config_default(fs_config** out) {
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fs_config{flowsiam::pipeline::DeskConfig()};
    return FS_OK;
  });
}

fs_status fs_config_load(const char* path, fs_config** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fs_config{flowsiam::pipeline::LoadConfig(path)};
    return FS_OK;
  });
}

fs_status fs_config_set(fs_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr) return NullArg("cfg");
  if (key == nullptr) return NullArg("key");
  if (value == nullptr) return NullArg("value");
  return Guard([&] {
    flowsiam::pipeline::RunConfig copy = cfg->value;
    flowsiam::pipeline::SetConfigValue(copy, key, value);
    cfg->value = std::move(copy);
    return FS_OK;
  });
}

fs_status fs_config_apply_env(fs_config* cfg) {
  if (cfg == nullptr) return NullArg("cfg");
  return Guard([&] {
    flowsiam::pipeline::ApplySeedOverride(cfg->value);
    return FS_OK;
  });
}

fs_status fs_config_seed(const fs_config* cfg, uint64_t* seed) {
  if (cfg == nullptr) return NullArg("cfg");
  if (seed == nullptr) return NullArg("seed");
  *seed = cfg->value.seed;
  return FS_OK;
}

fs_status fs_config_to_text(const fs_config* cfg, char* buf, size_t cap, size_t* needed) {
  if (cfg == nullptr) return NullArg("cfg");
  return Guard([&] {
    return CopyOut(flowsiam::pipeline::ConfigToText(cfg->value), buf, cap, needed);
  });
}

fs_status fs_config_get(const fs_config* cfg, const char* key, char* buf, size_t cap,
                        size_t* needed) {
  if (cfg == nullptr) return NullArg("cfg");
  if (key == nullptr) return NullArg("key");
  return Guard([&] {
    return CopyOut(flowsiam::pipeline::GetConfigValue(cfg->value, key), buf, cap, needed);
  });
}

void fs_config_free(fs_config* cfg) { delete cfg; }

fs_status fs_dataset_load(const char* path, fs_dataset** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fs_dataset{flowsiam::LoadDataset(path)};
    return FS_OK;
  });
}

fs_status fs_dataset_save(const fs_dataset* d, const char* path) {
  if (d == nullptr) return NullArg("dataset");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    flowsiam::SaveDataset(d->value, path);
    return FS_OK;
  });
}

fs_status fs_dataset_counts(const fs_dataset* d, size_t* flows, size_t* trajectories,
                            size_t* abnormal) {
  if (d == nullptr) return NullArg("dataset");
  if (flows != nullptr) *flows = d->value.flows.size();
  if (trajectories != nullptr) *trajectories = d->value.TrajectoryCount();
  if (abnormal != nullptr) {
    *abnormal = 0;
    for (const auto& f : d->value.flows)
      if (f.label == flowsiam::Label::kAbnormal) ++*abnormal;
  }
  return FS_OK;
}

fs_status fs_import_fcd(const char* path, size_t fleet_size, size_t steps, fs_dataset** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    auto imported = flowsiam::sim::ImportFcd(path, fleet_size, steps);
    for (const auto& w : imported.warnings)
      if (g_verbose) flowsiam::pipeline::StderrLogger()("warning: " + w);
    *out = new fs_dataset{std::move(imported.dataset)};
    return FS_OK;
  });
}

void fs_dataset_free(fs_dataset* d) { delete d; }

fs_status fs_model_load(const char* path, fs_model** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fs_model{flowsiam::siamese::LoadModel(path)};
    return FS_OK;
  });
}

fs_status fs_model_save(const fs_model* m, const char* path) {
  if (m == nullptr) return NullArg("model");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    flowsiam::siamese::SaveModel(m->value, path);
    return FS_OK;
  });
}

fs_status fs_model_dims(const fs_model* m, size_t* d, size_t* h1, size_t* latent,
                        size_t* steps) {
  if (m == nullptr) return NullArg("model");
  const auto& dims = m->value.dims;
  if (d != nullptr) *d = dims.d;
  if (h1 != nullptr) *h1 = dims.h1;
  if (latent != nullptr) *latent = dims.latent;
  if (steps != nullptr) *steps = dims.steps;
  return FS_OK;
}

fs_status fs_model_encode(const fs_model* m, const double* window, size_t rows, size_t cols,
                          double* latent, size_t latent_cap) {
  if (m == nullptr) return NullArg("model");
  if (window == nullptr) return NullArg("window");
  if (latent == nullptr) return NullArg("latent");
  return Guard([&] {
    if (latent_cap < m->value.dims.latent) {
      g_last_error = "latent buffer holds " + std::to_string(latent_cap) + " values, need " +
                     std::to_string(m->value.dims.latent);
      return FS_ERR_BUFFER_TOO_SMALL;
    }
    flowsiam::nn::Matrix w(rows, cols);
    std::memcpy(w.data(), window, rows * cols * sizeof(double));
    const auto code = flowsiam::siamese::Encode(m->value, w);
    std::memcpy(latent, code.data(), code.size() * sizeof(double));
    return FS_OK;
  });
}

void fs_model_free(fs_model* m) { delete m; }

fs_status fs_cmd_generate(const fs_config* cfg, const char* out_dir) {
  if (cfg == nullptr) return NullArg("cfg");
  if (out_dir == nullptr) return NullArg("out_dir");
  return Guard([&] {
    flowsiam::pipeline::CmdGenerate(cfg->value, out_dir, Log());
    return FS_OK;
  });
}

fs_status fs_cmd_train(const fs_config* cfg, const char* train_path, const char* model_out,
                       const char* log_out, const char* resume_model) {
  if (cfg == nullptr) return NullArg("cfg");
  if (train_path == nullptr) return NullArg("train_path");
  if (model_out == nullptr) return NullArg("model_out");
  return Guard([&] {
    flowsiam::pipeline::CmdTrain(cfg->value, train_path, model_out, Str(log_out),
                                 Str(resume_model), Log());
    return FS_OK;
  });
}

fs_status fs_cmd_score(const char* model_path, const char* dataset_path, const char* metric,
                       const char* score_mode, const char* out_path, const double* theta) {
  if (model_path == nullptr) return NullArg("model_path");
  if (dataset_path == nullptr) return NullArg("dataset_path");
  if (out_path == nullptr) return NullArg("out_path");
  return Guard([&] {
    flowsiam::detect::DetectorConfig dc;
    if (metric != nullptr) dc.metric = flowsiam::detect::ParseSimilarityMetric(metric);
    if (score_mode != nullptr) dc.mode = flowsiam::detect::ParseScoreMode(score_mode);
    std::optional<double> t;
    if (theta != nullptr) t = *theta;
    flowsiam::pipeline::CmdScore(model_path, dataset_path, dc, out_path, t);
    return FS_OK;
  });
}

fs_status fs_cmd_evaluate(const fs_config* cfg, const char* model_path,
                          const char* calibration_path, const char* test_path,
                          const char* out_dir) {
  if (cfg == nullptr) return NullArg("cfg");
  if (calibration_path == nullptr) return NullArg("calibration_path");
  if (test_path == nullptr) return NullArg("test_path");
  if (out_dir == nullptr) return NullArg("out_dir");
  return Guard([&] {
    flowsiam::pipeline::CmdEvaluate(cfg->value, Str(model_path), calibration_path, test_path,
                                    out_dir, Log());
    return FS_OK;
  });
}

fs_status fs_cmd_repro(const fs_config* cfg, const char* out_dir) {
  if (cfg == nullptr) return NullArg("cfg");
  if (out_dir == nullptr) return NullArg("out_dir");
  return Guard([&] {
    const auto out = flowsiam::pipeline::CmdRepro(cfg->value, out_dir, Log());
    if (out.passed()) return FS_OK;
    g_last_error = "acceptance bars failed:";
    for (const auto& b : out.bars)
      if (!b.passed) g_last_error += " " + b.name;
    return FS_ERR_BARS_FAILED;
  });
}

}  // extern "C"
