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

#include "flowsiam/baselines.hpp"
#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"

namespace flowsiam::baselines {
namespace {

using Clock = std::chrono::steady_clock;

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename PairFn>
double MeanPairwise(std::span<const Series> members, PairFn fn) {
  const std::size_t m = members.size();
  Require(m >= 2, ErrorCode::kInvalidArgument, "fleet score needs at least two members");
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) sum += fn(members[i], members[j]);
  return 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

template <typename FleetFn>
std::vector<detect::ScoredFlow> ScorePairwise(const Dataset& d, const Normalization& norm,
                                              FleetFn fn) {
  std::vector<detect::ScoredFlow> out(d.flows.size());
  ParallelFor(d.flows.size(), [&](std::size_t i) {
    const FleetFlow& f = d.flows[i];
    const auto start = Clock::now();
    std::vector<Series> windows;
    for (const auto& member : f.members) {
      const Trajectory t =
          member.samples.size() == d.steps ? member : ResampleToLength(member, d.steps);
      windows.push_back(ToWindow(t, d.feature_spec, norm));
    }
    const double score = fn(windows);
    out[i] = {f.flow_id, f.street_id, f.label, score, MillisSince(start)};
  });
  return out;
}

}  // namespace

double FleetScoreDtw(std::span<const Series> members, const DtwConfig& cfg) {
  const double mean = MeanPairwise(
      members, [&](const Series& a, const Series& b) { return DtwDistance(a, b, cfg); });
  const double scale = static_cast<double>(members[0].rows() * members[0].cols());
  return std::tanh(mean / scale);
}

double FleetScoreGak(std::span<const Series> members, const GakConfig& cfg) {
  std::vector<double> self(members.size());
  for (std::size_t i = 0; i < members.size(); ++i)
    self[i] = GakLogKernel(members[i], members[i], cfg);
  const std::size_t m = members.size();
  Require(m >= 2, ErrorCode::kInvalidArgument, "fleet score needs at least two members");
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double log_k = GakLogKernel(members[i], members[j], cfg);
      const double normalised = std::exp(log_k - 0.5 * (self[i] + self[j]));
      sum += std::clamp(1.0 - normalised, 0.0, 1.0);
    }
  }
  return 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

std::vector<double> VehicleSummary(const Trajectory& t) {
  Require(!t.samples.empty(), ErrorCode::kInvalidArgument,
          "vehicle '" + t.vehicle_id + "' has no samples");
  const auto& s = t.samples;
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (const auto& p : s) mean += p.speed;
  mean /= n;
  double var = 0.0;
  for (const auto& p : s) var += (p.speed - mean) * (p.speed - mean);
  double max_accel = 0.0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double dt = s[k].t - s[k - 1].t;
    if (dt > 0.0) max_accel = std::max(max_accel, std::abs(s[k].speed - s[k - 1].speed) / dt);
  }
  const double disp = std::hypot(s.back().x - s.front().x, s.back().y - s.front().y);
  return {mean, std::sqrt(var / n), max_accel, disp};
}

std::vector<double> FleetScoresIForest(const Dataset& d, const IForestConfig& cfg) {
  Require(d.flows.size() >= 2, ErrorCode::kInvalidArgument,
          "iForest fleet scoring needs at least two flows");
  std::vector<std::vector<double>> summaries;
  for (const auto& f : d.flows)
    for (const auto& m : f.members) summaries.push_back(VehicleSummary(m));
  nn::Matrix points(summaries.size(), summaries.front().size());
  for (std::size_t i = 0; i < summaries.size(); ++i)
    std::copy(summaries[i].begin(), summaries[i].end(), points.row(i).begin());

  IForestConfig c = cfg;
  c.subsample = std::min(cfg.subsample, points.rows());
  const IsolationForest forest = IsolationForest::Fit(points, c);
  std::vector<double> out(d.flows.size(), 0.0);
  std::size_t row = 0;
  for (std::size_t i = 0; i < d.flows.size(); ++i)
    for (std::size_t k = 0; k < d.flows[i].members.size(); ++k, ++row)
      out[i] = std::max(out[i], forest.Score(points.row(row)));
  return out;
}

std::vector<std::vector<Series>> DatasetWindows(const Dataset& d, const FeatureSpec& spec,
                                                const Normalization& norm) {
  std::vector<std::vector<Series>> out(d.flows.size());
  ParallelFor(d.flows.size(), [&](std::size_t i) {
    for (const auto& member : d.flows[i].members) {
      const Trajectory t =
          member.samples.size() == d.steps ? member : ResampleToLength(member, d.steps);
      out[i].push_back(ToWindow(t, spec, norm));
    }
  });
  return out;
}

std::vector<detect::ScoredFlow> ScoreDatasetDtw(const Dataset& d, const Normalization& norm,
                                                const DtwConfig& cfg) {
  return ScorePairwise(d, norm, [&](std::span<const Series> w) { return FleetScoreDtw(w, cfg); });
}

std::vector<detect::ScoredFlow> ScoreDatasetGak(const Dataset& d, const Normalization& norm,
                                                const GakConfig& cfg) {
  return ScorePairwise(d, norm, [&](std::span<const Series> w) { return FleetScoreGak(w, cfg); });
}

std::vector<detect::ScoredFlow> ScoreDatasetIForest(const Dataset& d, const IForestConfig& cfg) {
  const auto start = Clock::now();
  const std::vector<double> scores = FleetScoresIForest(d, cfg);
  const double per_flow = MillisSince(start) / static_cast<double>(d.flows.size());
  std::vector<detect::ScoredFlow> out;
  for (std::size_t i = 0; i < d.flows.size(); ++i) {
    const FleetFlow& f = d.flows[i];
    out.push_back({f.flow_id, f.street_id, f.label, scores[i], per_flow});
  }
  return out;
}

}  // namespace flowsiam::baselines
