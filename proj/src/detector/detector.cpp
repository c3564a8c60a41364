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
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include "flowsiam/detector.hpp"
#include "flowsiam/error.hpp"
#include "flowsiam/metrics.hpp"
#include "flowsiam/parallel.hpp"
#include "json.hpp"

namespace flowsiam::detect {
namespace {

double Millis(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

std::string_view ToString(SimilarityMetric m) {
  return m == SimilarityMetric::kMseTanh ? "mse" : "cosine";
}

std::string_view ToString(ScoreMode m) {
  return m == ScoreMode::kCanonical ? "canonical" : "paper-eq4";
}

SimilarityMetric ParseSimilarityMetric(std::string_view s) {
  if (s == "mse" || s == "mse-tanh") return SimilarityMetric::kMseTanh;
  if (s == "cosine") return SimilarityMetric::kCosine;
  Fail(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(s) + "' (mse|cosine)");
}

ScoreMode ParseScoreMode(std::string_view s) {
  if (s == "canonical") return ScoreMode::kCanonical;
  if (s == "paper-eq4") return ScoreMode::kPaperEq4;
  Fail(ErrorCode::kInvalidArgument,
       "unknown score mode '" + std::string(s) + "' (canonical|paper-eq4)");
}

CosineResult CosineSim(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), ErrorCode::kShape,
          "cosine of vectors with lengths " + std::to_string(a.size()) + " and " +
              std::to_string(b.size()));
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  return {std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0), false};
}

double PairDistance(std::span<const double> a, std::span<const double> b,
                    SimilarityMetric metric, bool* zero_norm) {
  if (metric == SimilarityMetric::kMseTanh) return siamese::Sim(a, b);
  const CosineResult c = CosineSim(a, b);
  if (zero_norm != nullptr && c.zero_norm) *zero_norm = true;
  return (1.0 - c.value) / 2.0;
}

PairwiseScore ScoreLatents(std::span<const std::vector<double>> latents, SimilarityMetric metric,
                           ScoreMode mode) {
  const std::size_t m = latents.size();
  Require(m >= 2, ErrorCode::kInvalidArgument, "abnormality score needs at least two members");
  PairwiseScore out;
  out.distances = nn::Matrix(m, m);
  std::vector<double> terms;
  terms.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = PairDistance(latents[i], latents[j], metric, &out.zero_norm);
      out.distances(i, j) = d;
      out.distances(j, i) = d;
      terms.push_back(d);
    }
  }
  // Summing in sorted order makes the score exactly invariant to member order.
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double d : terms) sum += d;
  const double canonical = 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
  out.score = mode == ScoreMode::kCanonical ? canonical : 1.0 - canonical / 2.0;
  return out;
}

double AbnormalityScore(std::span<const std::vector<double>> latents, SimilarityMetric metric,
                        ScoreMode mode) {
  return ScoreLatents(latents, metric, mode).score;
}

double ThresholdPolicy::ThetaFor(const std::string& street_id) const {
  if (auto it = per_street.find(street_id); it != per_street.end()) return it->second;
  Require(common.has_value(), ErrorCode::kInvalidArgument,
          "no threshold for street '" + street_id + "' and no common threshold");
  return *common;
}

std::vector<double> CandidateThresholds(std::span<const double> scores) {
  Require(!scores.empty(), ErrorCode::kInvalidArgument, "no scores to calibrate on");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> out;
  out.push_back(sorted.front() / 2.0);
  for (std::size_t k = 0; k + 1 < sorted.size(); ++k)
    out.push_back(sorted[k] + (sorted[k + 1] - sorted[k]) / 2.0);
  out.push_back(sorted.back());
  return out;
}

ThresholdChoice BestThreshold(std::span<const double> scores, std::span<const Label> labels) {
  const auto candidates = CandidateThresholds(scores);
  const double max_score = candidates.back();
  if (std::all_of(scores.begin(), scores.end(), [&](double s) { return s == max_score; }))
    return {max_score, eval::ComputePrf(eval::ConfusionAt(scores, labels, max_score)).f1};
  ThresholdChoice best{candidates.front(), -1.0};
  for (double theta : candidates) {
    const double f1 = eval::ComputePrf(eval::ConfusionAt(scores, labels, theta)).f1;
    if (f1 >= best.f1) best = {theta, f1};
  }
  return best;
}

ThresholdPolicy CalibrateThreshold(std::span<const ScoredFlow> calibration, PolicyKind kind) {
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& f : calibration) {
    scores.push_back(f.score);
    labels.push_back(f.label);
  }
  const auto both = [](std::span<const Label> l) {
    return std::count(l.begin(), l.end(), Label::kAbnormal) > 0 &&
           std::count(l.begin(), l.end(), Label::kNormal) > 0;
  };
  Require(both(labels), ErrorCode::kInvalidArgument,
          "calibration set must contain both Normal and Abnormal flows");
  ThresholdPolicy policy;
  policy.common = BestThreshold(scores, labels).theta;
  if (kind == PolicyKind::kCommon) return policy;

  std::set<std::string> streets;
  for (const auto& f : calibration) streets.insert(f.street_id);
  for (const auto& street : streets) {
    std::vector<double> s;
    std::vector<Label> l;
    for (const auto& f : calibration) {
      if (f.street_id != street) continue;
      s.push_back(f.score);
      l.push_back(f.label);
    }
    if (!both(l)) continue;
    const ThresholdChoice own = BestThreshold(s, l);
    const double common_f1 = eval::ComputePrf(eval::ConfusionAt(s, l, *policy.common)).f1;
    policy.per_street[street] = own.f1 >= common_f1 ? own.theta : *policy.common;
  }
  return policy;
}

DetectionResult ScoreFlow(const siamese::SiameseAutoencoder& model, const FleetFlow& flow,
                          const DetectorConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto windows = siamese::FlowWindows(model, flow);
  std::vector<std::vector<double>> latents;
  latents.reserve(windows.size());
  for (const auto& w : windows) latents.push_back(siamese::Encode(model, w));
  PairwiseScore ps = ScoreLatents(latents, cfg.metric, cfg.mode);
  DetectionResult r;
  r.flow_id = flow.flow_id;
  r.street_id = flow.street_id;
  r.score = ps.score;
  r.pairwise = std::move(ps.distances);
  r.zero_norm = ps.zero_norm;
  r.millis = Millis(start);
  return r;
}

DetectionResult ClassifyFlow(const siamese::SiameseAutoencoder& model, const FleetFlow& flow,
                             const DetectorConfig& cfg, const ThresholdPolicy& policy) {
  const double theta = policy.ThetaFor(flow.street_id);
  DetectionResult r = ScoreFlow(model, flow, cfg);
  r.theta = theta;
  r.decision = r.score > theta ? Label::kAbnormal : Label::kNormal;
  return r;
}

std::vector<ScoredFlow> ScoreDataset(const siamese::SiameseAutoencoder& model, const Dataset& d,
                                     const DetectorConfig& cfg) {
  Require(d.feature_spec == model.feature_spec, ErrorCode::kInvalidArgument,
          "dataset feature_spec does not match the model's");
  std::vector<ScoredFlow> out(d.flows.size());
  ParallelFor(d.flows.size(), [&](std::size_t i) {
    const FleetFlow& f = d.flows[i];
    const DetectionResult r = ScoreFlow(model, f, cfg);
    out[i] = {f.flow_id, f.street_id, f.label, r.score, r.millis};
  });
  return out;
}

void WriteJsonLines(std::span<const ScoredFlow> flows, const std::string& method,
                    const ThresholdPolicy* policy, std::ostream& out) {
  for (const auto& f : flows) {
    nlohmann::ordered_json rec;
    rec["flow_id"] = f.flow_id;
    rec["street_id"] = f.street_id;
    rec["score"] = f.score;
    if (policy != nullptr) {
      const double theta = policy->ThetaFor(f.street_id);
      rec["decision"] = std::string(ToString(f.score > theta ? Label::kAbnormal : Label::kNormal));
      rec["theta"] = theta;
    } else {
      rec["decision"] = nullptr;
      rec["theta"] = nullptr;
    }
    rec["millis"] = f.millis;
    rec["method"] = method;
    out << rec.dump() << '\n';
  }
}

}  // namespace flowsiam::detect
