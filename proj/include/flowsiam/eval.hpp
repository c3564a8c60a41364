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

// Runs scoring methods over calibration and test datasets and assembles the
// evaluation report and its plot-ready files.

#ifndef FLOWSIAM_EVAL_HPP_
#define FLOWSIAM_EVAL_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowsiam/core.hpp"
#include "flowsiam/detector.hpp"
#include "flowsiam/metrics.hpp"

namespace flowsiam::eval {

struct MethodInput {
  std::string method;  // file-name safe tag, e.g. "siamese-mse"
  std::function<std::vector<detect::ScoredFlow>(const Dataset&)> score;
};

struct StreetRow {
  std::string street_id;
  std::size_t calibration_flows = 0;
  std::size_t test_flows = 0;
  double theta_individual = 0.0;
  double theta_common = 0.0;
  double f1_individual_calibration = 0.0;
  double f1_common_calibration = 0.0;
  double f1_individual_test = 0.0;
  double f1_common_test = 0.0;
};

struct MethodReport {
  std::string method;
  bool ok = false;
  std::string error;
  detect::ThresholdPolicy policy;
  double theta = 0.0;  // common threshold applied to the test split
  ConfusionCounts counts;
  PrecisionRecallF1 prf;
  RocCurve roc;
  std::vector<CurvePoint> pr;
  double mean_scoring_millis = 0.0;
  std::vector<StreetRow> per_street;
  std::vector<detect::ScoredFlow> test_scores;
};

struct EvalOptions {
  bool per_street = false;
};

struct EvalReport {
  std::size_t calibration_flows = 0;
  std::size_t test_flows = 0;
  std::vector<MethodReport> methods;

  const MethodReport* Find(const std::string& method) const;
};

// Calibrates a common threshold on the calibration scores of each method and
// evaluates it on the test scores. A method that throws is recorded with its
// error and the others still run.
EvalReport EvaluateMethods(const Dataset& calibration, const Dataset& test,
                           const std::vector<MethodInput>& methods, const EvalOptions& options);

// Per-street individual versus common thresholds for already computed scores.
std::vector<StreetRow> PerStreetStudy(const std::vector<detect::ScoredFlow>& calibration,
                                      const std::vector<detect::ScoredFlow>& test,
                                      const detect::ThresholdPolicy& policy);

// Machine-readable report; timing fields end in "millis" or "seconds".
std::string ReportToJson(const EvalReport& report, int indent = 2);

// roc_<method>.csv, pr_<method>.csv, confusion.csv and report.json.
void WriteArtifacts(const EvalReport& report, const std::string& dir);

}  // namespace flowsiam::eval

#endif  // FLOWSIAM_EVAL_HPP_
