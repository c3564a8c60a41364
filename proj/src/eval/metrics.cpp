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

#include <algorithm>
#include <cmath>

#include "flowsiam/error.hpp"
#include "flowsiam/metrics.hpp"

namespace flowsiam::eval {
namespace {

void CheckLengths(std::span<const double> scores, std::span<const Label> labels) {
  Require(scores.size() == labels.size(), ErrorCode::kInvalidArgument,
          "scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
              std::to_string(labels.size()) + ")");
}

double Ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct Sweep {
  double threshold;
  std::size_t tp;
  std::size_t fp;
};

// Cumulative counts at every distinct score, highest first, using >=.
std::vector<Sweep> SweepDistinct(std::span<const double> scores, std::span<const Label> labels) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Sweep> out;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    Require(!std::isnan(scores[i]), ErrorCode::kNumeric, "score is NaN");
    (labels[i] == Label::kAbnormal ? tp : fp) += 1;
    if (k + 1 == order.size() || scores[order[k + 1]] != scores[i])
      out.push_back({scores[i], tp, fp});
  }
  return out;
}

}  // namespace

ConfusionCounts ConfusionAt(std::span<const double> scores, std::span<const Label> labels,
                            double theta) {
  CheckLengths(scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool positive = scores[i] > theta;
    if (labels[i] == Label::kAbnormal)
      (positive ? c.tp : c.fn) += 1;
    else
      (positive ? c.fp : c.tn) += 1;
  }
  return c;
}

double F1FromPrecisionRecall(double precision, double recall) {
  const double sum = precision + recall;
  return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

PrecisionRecallF1 ComputePrf(const ConfusionCounts& c) {
  PrecisionRecallF1 r;
  r.precision = Ratio(c.tp, c.tp + c.fp);
  r.recall = Ratio(c.tp, c.tp + c.fn);
  r.f1 = F1FromPrecisionRecall(r.precision, r.recall);
  return r;
}

RocCurve ComputeRoc(std::span<const double> scores, std::span<const Label> labels) {
  CheckLengths(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::kAbnormal));
  const std::size_t neg = labels.size() - pos;
  Require(pos > 0 && neg > 0, ErrorCode::kInvalidArgument,
          "ROC curve needs both Normal and Abnormal labels");
  RocCurve roc;
  double prev_x = 0.0;
  double prev_y = 0.0;
  for (const Sweep& s : SweepDistinct(scores, labels)) {
    const double x = Ratio(s.fp, neg);
    const double y = Ratio(s.tp, pos);
    roc.auc += (x - prev_x) * (y + prev_y) / 2.0;
    roc.points.push_back({s.threshold, x, y});
    prev_x = x;
    prev_y = y;
  }
  return roc;
}

std::vector<CurvePoint> ComputePr(std::span<const double> scores, std::span<const Label> labels) {
  CheckLengths(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::kAbnormal));
  Require(pos > 0, ErrorCode::kInvalidArgument, "PR curve needs at least one Abnormal label");
  std::vector<CurvePoint> out;
  for (const Sweep& s : SweepDistinct(scores, labels))
    out.push_back({s.threshold, Ratio(s.tp, pos), Ratio(s.tp, s.tp + s.fp)});
  return out;
}

}  // namespace flowsiam::eval
