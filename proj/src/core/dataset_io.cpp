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

#include <fstream>
#include <sstream>

#include "flowsiam/core.hpp"
#include "flowsiam/error.hpp"
#include "json.hpp"

namespace flowsiam {
namespace {

using nlohmann::json;

constexpr const char* kDatasetFormat = "flowsiam-dataset";
constexpr int kDatasetVersion = 1;

json NormalizationToJson(const std::optional<Normalization>& n) {
  if (!n) return nullptr;
  return json{{"shift", n->shift}, {"scale", n->scale}};
}

template <typename T>
T Get(const json& j, const char* key, const std::string& where) {
  Require(j.is_object() && j.contains(key), ErrorCode::kParse,
          where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParse, where + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

std::string DatasetToJson(const Dataset& d) {
  json flows = json::array();
  for (const auto& f : d.flows) {
    json members = json::array();
    for (const auto& m : f.members) {
      json samples = json::array();
      for (const auto& s : m.samples) samples.push_back({s.t, s.x, s.y, s.speed});
      members.push_back(
          {{"vehicle_id", m.vehicle_id}, {"rate_hz", m.rate_hz}, {"samples", samples}});
    }
    json kind = nullptr;
    if (f.anomaly_kind) kind = std::string(ToString(*f.anomaly_kind));
    flows.push_back({{"flow_id", f.flow_id},
                     {"label", std::string(ToString(f.label))},
                     {"street_id", f.street_id},
                     {"anomaly_kind", kind},
                     {"flags", f.flags},
                     {"members", members}});
  }
  json doc = {{"format", kDatasetFormat},
              {"format_version", kDatasetVersion},
              {"feature_spec", d.feature_spec},
              {"rate_hz", d.rate_hz},
              {"T", d.steps},
              {"normalization", NormalizationToJson(d.normalization)},
              {"flows", flows}};
  return doc.dump() + "\n";
}

Dataset DatasetFromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParse, std::string("dataset is not valid JSON: ") + e.what());
  }
  const std::string where = "dataset";
  Require(Get<std::string>(doc, "format", where) == kDatasetFormat, ErrorCode::kParse,
          "not a flowsiam dataset file");
  const int version = Get<int>(doc, "format_version", where);
  Require(version == kDatasetVersion, ErrorCode::kVersion,
          "unsupported dataset format_version " + std::to_string(version));
  Dataset d;
  d.feature_spec = Get<FeatureSpec>(doc, "feature_spec", where);
  d.rate_hz = Get<double>(doc, "rate_hz", where);
  d.steps = Get<std::size_t>(doc, "T", where);
  if (doc.contains("normalization") && !doc["normalization"].is_null()) {
    const json& n = doc["normalization"];
    d.normalization = Normalization{Get<std::vector<double>>(n, "shift", "normalization"),
                                    Get<std::vector<double>>(n, "scale", "normalization")};
  }
  const json flows = Get<json>(doc, "flows", where);
  Require(flows.is_array(), ErrorCode::kParse, "dataset: 'flows' must be an array");
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const json& jf = flows[i];
    const std::string fw = "flow[" + std::to_string(i) + "]";
    FleetFlow f;
    f.flow_id = Get<std::string>(jf, "flow_id", fw);
    f.label = ParseLabel(Get<std::string>(jf, "label", fw));
    f.street_id = Get<std::string>(jf, "street_id", fw);
    if (jf.contains("anomaly_kind") && !jf["anomaly_kind"].is_null())
      f.anomaly_kind = ParseAnomalyKind(Get<std::string>(jf, "anomaly_kind", fw));
    if (jf.contains("flags")) f.flags = Get<std::vector<std::string>>(jf, "flags", fw);
    const json members = Get<json>(jf, "members", fw);
    Require(members.is_array(), ErrorCode::kParse, fw + ": 'members' must be an array");
    for (const json& jm : members) {
      Trajectory t;
      t.vehicle_id = Get<std::string>(jm, "vehicle_id", fw);
      t.rate_hz = Get<double>(jm, "rate_hz", fw);
      const auto rows = Get<std::vector<std::vector<double>>>(jm, "samples", fw);
      for (const auto& r : rows) {
        Require(r.size() == 4, ErrorCode::kParse,
                fw + ": sample rows must be [t, x, y, speed]");
        t.samples.push_back({r[0], r[1], r[2], r[3]});
      }
      f.members.push_back(std::move(t));
    }
    d.flows.push_back(std::move(f));
  }
  ValidateDataset(d);
  return d;
}

void SaveDataset(const Dataset& d, const std::string& path) {
  const std::string text = DatasetToJson(d);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIo, "failed writing '" + path + "'");
}

Dataset LoadDataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return DatasetFromJson(buf.str());
}

}  // namespace flowsiam
