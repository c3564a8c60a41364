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

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>

#include "flowsiam/error.hpp"
#include "flowsiam/eval.hpp"
#include "json.hpp"

namespace flowsiam::eval {
namespace {

using nlohmann::ordered_json;

std::string Num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct Split {
  std::vector<double> scores;
  std::vector<Label> labels;
};

Split Select(const std::vector<detect::ScoredFlow>& flows, const std::string* street) {
  Split s;
  for (const auto& f : flows) {
    if (street != nullptr && f.street_id != *street) continue;
    s.scores.push_back(f.score);
    s.labels.push_back(f.label);
  }
  return s;
}

double F1At(const Split& s, double theta) {
  return ComputePrf(ConfusionAt(s.scores, s.labels, theta)).f1;
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo,
          "cannot open '" + path.string() + "' for writing");
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

ordered_json CurveJson(const std::vector<CurvePoint>& pts, const char* x, const char* y) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : pts) arr.push_back({{"threshold", p.threshold}, {x, p.x}, {y, p.y}});
  return arr;
}

}  // namespace

const MethodReport* EvalReport::Find(const std::string& method) const {
  for (const auto& m : methods)
    if (m.method == method) return &m;
  return nullptr;
}

std::vector<StreetRow> PerStreetStudy(const std::vector<detect::ScoredFlow>& calibration,
                                      const std::vector<detect::ScoredFlow>& test,
                                      const detect::ThresholdPolicy& policy) {
  Require(policy.common.has_value(), ErrorCode::kInvalidArgument,
          "per-street study needs a common threshold");
  std::set<std::string> streets;
  for (const auto& f : calibration) streets.insert(f.street_id);
  for (const auto& f : test) streets.insert(f.street_id);
  std::vector<StreetRow> rows;
  for (const auto& street : streets) {
    const Split cal = Select(calibration, &street);
    const Split tst = Select(test, &street);
    StreetRow row;
    row.street_id = street;
    row.calibration_flows = cal.scores.size();
    row.test_flows = tst.scores.size();
    row.theta_individual = policy.ThetaFor(street);
    row.theta_common = *policy.common;
    row.f1_individual_calibration = F1At(cal, row.theta_individual);
    row.f1_common_calibration = F1At(cal, row.theta_common);
    row.f1_individual_test = F1At(tst, row.theta_individual);
    row.f1_common_test = F1At(tst, row.theta_common);
    rows.push_back(row);
  }
  return rows;
}

EvalReport EvaluateMethods(const Dataset& calibration, const Dataset& test,
                           const std::vector<MethodInput>& methods, const EvalOptions& options) {
  EvalReport report;
  report.calibration_flows = calibration.flows.size();
  report.test_flows = test.flows.size();
  for (const auto& input : methods) {
    MethodReport r;
    r.method = input.method;
    try {
      const auto cal = input.score(calibration);
      auto tst = input.score(test);
      r.policy = detect::CalibrateThreshold(
          cal, options.per_street ? detect::PolicyKind::kPerStreet : detect::PolicyKind::kCommon);
      r.theta = *r.policy.common;
      const Split s = Select(tst, nullptr);
      r.counts = ConfusionAt(s.scores, s.labels, r.theta);
      r.prf = ComputePrf(r.counts);
      r.roc = ComputeRoc(s.scores, s.labels);
      r.pr = ComputePr(s.scores, s.labels);
      double total = 0.0;
      for (const auto& f : tst) total += f.millis;
      r.mean_scoring_millis = tst.empty() ? 0.0 : total / static_cast<double>(tst.size());
      if (options.per_street) r.per_street = PerStreetStudy(cal, tst, r.policy);
      r.test_scores = std::move(tst);
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    report.methods.push_back(std::move(r));
  }
  return report;
}

std::string ReportToJson(const EvalReport& report, int indent) {
  ordered_json methods = ordered_json::array();
  for (const auto& m : report.methods) {
    ordered_json j;
    j["method"] = m.method;
    j["status"] = m.ok ? "ok" : "failed";
    if (!m.ok) {
      j["error"] = m.error;
      methods.push_back(j);
      continue;
    }
    j["theta"] = m.theta;
    ordered_json per_theta = ordered_json::object();
    for (const auto& [street, theta] : m.policy.per_street) per_theta[street] = theta;
    j["per_street_theta"] = per_theta;
    j["counts"] = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn},
                   {"fn", m.counts.fn}};
    j["precision"] = m.prf.precision;
    j["recall"] = m.prf.recall;
    j["f1"] = m.prf.f1;
    j["roc_auc"] = m.roc.auc;
    j["roc"] = CurveJson(m.roc.points, "fpr", "tpr");
    j["pr"] = CurveJson(m.pr, "recall", "precision");
    j["mean_scoring_millis"] = m.mean_scoring_millis;
    if (!m.per_street.empty()) {
      ordered_json rows = ordered_json::array();
      for (const auto& r : m.per_street)
        rows.push_back({{"street_id", r.street_id},
                        {"calibration_flows", r.calibration_flows},
                        {"test_flows", r.test_flows},
                        {"theta_individual", r.theta_individual},
                        {"theta_common", r.theta_common},
                        {"f1_individual_calibration", r.f1_individual_calibration},
                        {"f1_common_calibration", r.f1_common_calibration},
                        {"f1_individual_test", r.f1_individual_test},
                        {"f1_common_test", r.f1_common_test}});
      j["per_street"] = rows;
    }
    methods.push_back(j);
  }
  ordered_json doc;
  doc["calibration_flows"] = report.calibration_flows;
  doc["test_flows"] = report.test_flows;
  doc["methods"] = methods;
  return doc.dump(indent) + "\n";
}

void WriteArtifacts(const EvalReport& report, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  std::string confusion = "method,tp,fp,tn,fn\n";
  for (const auto& m : report.methods) {
    if (!m.ok) continue;
    std::string roc = "threshold,fpr,tpr\n";
    for (const auto& p : m.roc.points)
      roc += Num(p.threshold) + "," + Num(p.x) + "," + Num(p.y) + "\n";
    WriteFile(root / ("roc_" + m.method + ".csv"), roc);
    std::string pr = "threshold,recall,precision\n";
    for (const auto& p : m.pr) pr += Num(p.threshold) + "," + Num(p.x) + "," + Num(p.y) + "\n";
    WriteFile(root / ("pr_" + m.method + ".csv"), pr);
    confusion += m.method + "," + std::to_string(m.counts.tp) + "," +
                 std::to_string(m.counts.fp) + "," + std::to_string(m.counts.tn) + "," +
                 std::to_string(m.counts.fn) + "\n";
  }
  WriteFile(root / "confusion.csv", confusion);
  WriteFile(root / "report.json", ReportToJson(report));
}

}  // namespace flowsiam::eval
