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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "flowsiam/error.hpp"
#include "flowsiam/pipeline.hpp"

namespace flowsiam::pipeline {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string Unquote(const std::string& raw) {
  std::string s = Trim(raw);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

std::string Quote(const std::string& s) { return "\"" + s + "\""; }

std::vector<std::string> ParseList(const std::string& key, const std::string& raw) {
  const std::string s = Trim(raw);
  Require(s.size() >= 2 && s.front() == '[' && s.back() == ']', ErrorCode::kParse,
          key + ": expected a list like [\"a\", \"b\"], got '" + s + "'");
  std::vector<std::string> out;
  std::stringstream body(s.substr(1, s.size() - 2));
  std::string item;
  while (std::getline(body, item, ',')) {
    item = Unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string ListToText(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + Quote(items[i]);
  return out + "]";
}

std::uint64_t ParseUnsigned(const std::string& key, const std::string& raw) {
  const std::string s = Unquote(raw);
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  Require(r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty(), ErrorCode::kParse,
          key + ": expected a nonnegative integer, got '" + s + "'");
  return v;
}

double ParseDouble(const std::string& key, const std::string& raw) {
  const std::string s = Unquote(raw);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  Require(r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty(), ErrorCode::kParse,
          key + ": expected a number, got '" + s + "'");
  return v;
}

bool ParseBool(const std::string& key, const std::string& raw) {
  const std::string s = Unquote(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  Fail(ErrorCode::kParse, key + ": expected true or false, got '" + s + "'");
}

std::string Num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

using Setter = void (*)(RunConfig&, const std::string&, const std::string&);
using Getter = std::string (*)(const RunConfig&);

struct Field {
  Setter set;
  Getter get;
};

#define FS_SIZE(expr)                                                             \
  Field {                                                                         \
    [](RunConfig& c, const std::string& k, const std::string& v) {                \
      expr = static_cast<std::size_t>(ParseUnsigned(k, v));                       \
    },                                                                            \
        [](const RunConfig& c) { return std::to_string(expr); }                   \
  }
#define FS_REAL(expr)                                                                        \
  Field {                                                                                    \
    [](RunConfig& c, const std::string& k, const std::string& v) { expr = ParseDouble(k, v); }, \
        [](const RunConfig& c) { return Num(expr); }                                         \
  }

const std::map<std::string, Field>& Fields() {
  static const std::map<std::string, Field> fields = {
      {"experiment.name",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.experiment = Unquote(v); },
        [](const RunConfig& c) { return Quote(c.experiment); }}},
      {"experiment.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seed = ParseUnsigned(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"experiment.output_dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = Unquote(v); },
        [](const RunConfig& c) { return Quote(c.output_dir); }}},
      {"experiment.threads", FS_SIZE(c.threads)},

      {"generator.flows", FS_SIZE(c.generator.flows)},
      {"generator.fleet_size", FS_SIZE(c.generator.fleet_size)},
      {"generator.steps", FS_SIZE(c.generator.steps)},
      {"generator.rate_hz", FS_REAL(c.generator.rate_hz)},
      {"generator.feature_spec",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.generator.feature_spec = ParseList(k, v);
        },
        [](const RunConfig& c) { return ListToText(c.generator.feature_spec); }}},
      {"generator.scenario_constant", FS_REAL(c.generator.scenario_mix.constant)},
      {"generator.scenario_raise", FS_REAL(c.generator.scenario_mix.raise)},
      {"generator.scenario_decline", FS_REAL(c.generator.scenario_mix.decline)},
      {"generator.min_gap", FS_REAL(c.generator.min_gap)},
      {"generator.accel_limit", FS_REAL(c.generator.accel_limit)},
      {"generator.change_time", FS_REAL(c.generator.change_time)},
      {"generator.raise_factor", FS_REAL(c.generator.raise_factor)},
      {"generator.decline_factor", FS_REAL(c.generator.decline_factor)},
      {"generator.headway_min", FS_REAL(c.generator.headway_min)},
      {"generator.headway_max", FS_REAL(c.generator.headway_max)},
      {"generator.lane_width", FS_REAL(c.generator.lane_width)},

      {"evaluation.calibration_flows", FS_SIZE(c.evaluation.calibration_flows)},
      {"evaluation.test_flows", FS_SIZE(c.evaluation.test_flows)},
      {"evaluation.abnormal_fraction", FS_REAL(c.evaluation.abnormal_fraction)},
      {"evaluation.over_speed", FS_REAL(c.evaluation.kind_mix.over_speed)},
      {"evaluation.under_speed", FS_REAL(c.evaluation.kind_mix.under_speed)},
      {"evaluation.streets",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.evaluation.streets = ParseList(k, v);
        },
        [](const RunConfig& c) { return ListToText(c.evaluation.streets); }}},

      {"split.train",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (!c.split) c.split = SplitFractions{};
          c.split->train = ParseDouble(k, v);
        },
        [](const RunConfig& c) { return Num(c.split ? c.split->train : 0.0); }}},
      {"split.calibration",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (!c.split) c.split = SplitFractions{};
          c.split->calibration = ParseDouble(k, v);
        },
        [](const RunConfig& c) { return Num(c.split ? c.split->calibration : 0.0); }}},
      {"split.test",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (!c.split) c.split = SplitFractions{};
          c.split->test = ParseDouble(k, v);
        },
        [](const RunConfig& c) { return Num(c.split ? c.split->test : 0.0); }}},

      {"model.h1", FS_SIZE(c.h1)},
      {"model.latent",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.latent = static_cast<std::size_t>(ParseUnsigned(k, v));
        },
        [](const RunConfig& c) {
          return std::to_string(c.latent.value_or(siamese::DefaultLatentSize(c.h1)));
        }}},

      {"train.lambda", FS_REAL(c.train.lambda)},
      {"train.epochs_max", FS_SIZE(c.train.epochs_max)},
      {"train.batch_flows", FS_SIZE(c.train.batch_flows)},
      {"train.lr", FS_REAL(c.train.lr)},
      {"train.patience", FS_SIZE(c.train.patience)},
      {"train.min_delta", FS_REAL(c.train.min_delta)},
      {"train.clip_norm", FS_REAL(c.train.clip_norm)},

      {"detector.metric",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.detector.metric = detect::ParseSimilarityMetric(Unquote(v));
        },
        [](const RunConfig& c) { return Quote(std::string(detect::ToString(c.detector.metric))); }}},
      {"detector.score_mode",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.detector.mode = detect::ParseScoreMode(Unquote(v));
        },
        [](const RunConfig& c) { return Quote(std::string(detect::ToString(c.detector.mode))); }}},
      {"detector.per_street",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.per_street = ParseBool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.per_street ? "true" : "false"); }}},

      {"baselines.dtw_band",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const auto band = ParseUnsigned(k, v);
          c.baselines.dtw.band = band == 0 ? std::nullopt
                                           : std::optional<std::size_t>(band);
        },
        [](const RunConfig& c) { return std::to_string(c.baselines.dtw.band.value_or(0)); }}},
      {"baselines.gak_sigma", FS_REAL(c.baselines.gak_sigma)},
      {"baselines.iforest_trees", FS_SIZE(c.baselines.iforest_trees)},
      {"baselines.iforest_subsample", FS_SIZE(c.baselines.iforest_subsample)},

      {"evaluate.methods",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.methods = ParseList(k, v);
        },
        [](const RunConfig& c) { return ListToText(c.methods); }}},
  };
  return fields;
}

#undef FS_SIZE
#undef FS_REAL

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RunConfig DeskConfig() {
  RunConfig c;
  c.generator.seed = c.seed;
  c.generator.flows = 300;
  c.generator.fleet_size = 5;
  c.generator.steps = 60;
  c.generator.feature_spec = {"speed"};
  c.generator.streets = {sim::TrainingStreet()};
  c.generator.scenario_mix = {1.0, 1.0, 1.0};
  c.generator.abnormal_fraction = 0.0;
  c.train.epochs_max = 60;
  c.train.patience = 20;
  c.train.min_delta = 1e-5;
  return c;
}

void SetConfigValue(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& fields = Fields();
  const auto it = fields.find(key);
  Require(it != fields.end(), ErrorCode::kParse, "unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

std::string GetConfigValue(const RunConfig& cfg, const std::string& key) {
  const auto& fields = Fields();
  const auto it = fields.find(key);
  Require(it != fields.end(), ErrorCode::kParse, "unknown config key '" + key + "'");
  return Unquote(it->second.get(cfg));
}

RunConfig ParseConfig(std::string_view text, RunConfig base) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    Fail(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    Require(!body.empty() || body.data().empty(), ErrorCode::kParse,
            "config: key '" + section + "' must be inside a [section]");
    for (const auto& [name, node] : body)
      SetConfigValue(base, section + "." + name, node.data());
  }
  return base;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str());
}

void ApplySeedOverride(RunConfig& cfg) {
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0')
    cfg.seed = ParseUnsigned(kSeedEnv, env);
}

void ValidateRunConfig(const RunConfig& cfg) {
  Require(!cfg.experiment.empty(), ErrorCode::kInvalidArgument, "experiment name is empty");
  sim::GeneratorConfig g = cfg.generator;
  g.seed = cfg.seed;
  sim::ValidateConfig(g);
  Require(g.fleet_size >= 2, ErrorCode::kInvalidArgument, "fleet_size must be >= 2");
  const auto& e = cfg.evaluation;
  Require(e.abnormal_fraction >= 0.0 && e.abnormal_fraction <= 1.0,
          ErrorCode::kInvalidArgument, "evaluation.abnormal_fraction must lie in [0, 1]");
  Require(!e.streets.empty(), ErrorCode::kInvalidArgument, "evaluation.streets is empty");
  const auto known = sim::EvaluationStreets();
  for (const auto& s : e.streets) {
    bool found = s == sim::TrainingStreet().street_id;
    for (const auto& k : known) found = found || k.street_id == s;
    Require(found, ErrorCode::kInvalidArgument, "unknown street '" + s + "'");
  }
  if (cfg.split) {
    const auto& f = *cfg.split;
    Require(f.train >= 0.0 && f.calibration >= 0.0 && f.test >= 0.0 &&
                f.train + f.calibration + f.test > 0.0,
            ErrorCode::kInvalidArgument, "split fractions must be nonnegative, not all zero");
  }
  Require(cfg.h1 >= 1, ErrorCode::kInvalidArgument, "model.h1 must be >= 1");
  const std::size_t latent = cfg.latent.value_or(siamese::DefaultLatentSize(cfg.h1));
  Require(latent >= 1 && latent < g.steps * g.feature_spec.size(), ErrorCode::kInvalidArgument,
          "model.latent must lie in [1, T*d)");
  Require(cfg.train.lambda >= 0.0, ErrorCode::kInvalidArgument, "train.lambda must be >= 0");
  Require(cfg.train.epochs_max >= 1, ErrorCode::kInvalidArgument, "train.epochs_max must be >= 1");
  Require(cfg.train.batch_flows >= 1, ErrorCode::kInvalidArgument,
          "train.batch_flows must be >= 1");
  Require(cfg.train.lr > 0.0, ErrorCode::kInvalidArgument, "train.lr must be > 0");
  Require(cfg.train.clip_norm > 0.0, ErrorCode::kInvalidArgument, "train.clip_norm must be > 0");
  Require(cfg.baselines.gak_sigma >= 0.0, ErrorCode::kInvalidArgument,
          "baselines.gak_sigma must be >= 0");
  Require(cfg.baselines.iforest_trees >= 1 && cfg.baselines.iforest_subsample >= 2,
          ErrorCode::kInvalidArgument, "iforest_trees >= 1 and iforest_subsample >= 2");
  static const std::vector<std::string> kMethods = {"siamese-mse", "siamese-cosine", "dtw",
                                                    "gak", "iforest"};
  Require(!cfg.methods.empty(), ErrorCode::kInvalidArgument, "evaluate.methods is empty");
  for (const auto& m : cfg.methods)
    Require(std::find(kMethods.begin(), kMethods.end(), m) != kMethods.end(),
            ErrorCode::kInvalidArgument, "unknown method '" + m + "'");
}

std::string ConfigToText(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& [key, field] : Fields()) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s == "split" && !cfg.split) continue;
    if (s != section) {
      out += (out.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += key.substr(dot + 1) + " = " + field.get(cfg) + "\n";
  }
  return out;
}

std::uint64_t DeriveSeed(std::uint64_t seed, SeedStream stream) {
  return SplitMix64(seed ^ SplitMix64(static_cast<std::uint64_t>(stream) + 1));
}

}  // namespace flowsiam::pipeline
