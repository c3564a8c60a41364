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

// Binary-classification metrics with Abnormal as the positive class.

#ifndef FLOWSIAM_METRICS_HPP_
#define FLOWSIAM_METRICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "flowsiam/core.hpp"

namespace flowsiam::eval {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Predicted Abnormal iff score > theta.
ConfusionCounts ConfusionAt(std::span<const double> scores, std::span<const Label> labels,
                            double theta);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 is taken as 0 for every ratio.
PrecisionRecallF1 ComputePrf(const ConfusionCounts& c);
double F1FromPrecisionRecall(double precision, double recall);

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct RocCurve {
  std::vector<CurvePoint> points;  // x = FPR, y = TPR
  double auc = 0.0;
};

// One point per distinct score, predicting Abnormal for score >= threshold,
// in decreasing threshold order. The trapezoid AUC starts from (0, 0).
RocCurve ComputeRoc(std::span<const double> scores, std::span<const Label> labels);

// x = recall, y = precision, one point per distinct score, recall ascending.
std::vector<CurvePoint> ComputePr(std::span<const double> scores, std::span<const Label> labels);

}  // namespace flowsiam::eval

#endif  // FLOWSIAM_METRICS_HPP_
