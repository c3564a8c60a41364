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
#include <limits>
#include <numeric>
#include <random>

#include "flowsiam/core.hpp"
#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"

namespace flowsiam {
namespace {

std::size_t g_max_threads = 0;

}  // namespace

void SetMaxThreads(std::size_t n) { g_max_threads = n; }

std::size_t MaxThreads() {
  if (g_max_threads > 0) return g_max_threads;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::string_view ToString(Label label) {
  return label == Label::kNormal ? "Normal" : "Abnormal";
}

std::string_view ToString(AnomalyKind kind) {
  return kind == AnomalyKind::kOverSpeed ? "OverSpeed" : "UnderSpeed";
}

Label ParseLabel(std::string_view text) {
  if (text == "Normal") return Label::kNormal;
  if (text == "Abnormal") return Label::kAbnormal;
  Fail(ErrorCode::kParse, "unknown label '" + std::string(text) + "'");
}

AnomalyKind ParseAnomalyKind(std::string_view text) {
  if (text == "OverSpeed") return AnomalyKind::kOverSpeed;
  if (text == "UnderSpeed") return AnomalyKind::kUnderSpeed;
  Fail(ErrorCode::kParse, "unknown anomaly kind '" + std::string(text) + "'");
}

FeatureSpec DefaultFeatureSpec() { return {"x", "y", "speed"}; }

std::size_t Dataset::TrajectoryCount() const {
  std::size_t n = 0;
  for (const auto& f : flows) n += f.members.size();
  return n;
}

void ValidateTrajectory(const Trajectory& t) {
  const std::string who = "trajectory '" + t.vehicle_id + "': ";
  Require(!t.samples.empty(), ErrorCode::kInvalidArgument, who + "no samples");
  Require(std::isfinite(t.rate_hz) && t.rate_hz > 0.0, ErrorCode::kInvalidArgument,
          who + "rate_hz must be positive");
  const double step = 1.0 / t.rate_hz;
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const Sample& s = t.samples[i];
    Require(std::isfinite(s.t) && std::isfinite(s.x) && std::isfinite(s.y) &&
                std::isfinite(s.speed),
            ErrorCode::kInvalidArgument, who + "non-finite sample " + std::to_string(i));
    Require(s.speed >= 0.0, ErrorCode::kInvalidArgument,
            who + "negative speed at sample " + std::to_string(i));
    if (i > 0) {
      const double dt = s.t - t.samples[i - 1].t;
      Require(std::abs(dt - step) <= kTimestampTolerance, ErrorCode::kInvalidArgument,
              who + "sample " + std::to_string(i) + " breaks the constant time step");
    }
  }
}

void ValidateFlow(const FleetFlow& flow) {
  const std::string who = "flow '" + flow.flow_id + "': ";
  Require(flow.members.size() >= 2, ErrorCode::kInvalidArgument,
          who + "needs at least two members");
  for (const auto& m : flow.members) ValidateTrajectory(m);
  const auto& first = flow.members.front();
  for (const auto& m : flow.members) {
    Require(m.samples.size() == first.samples.size(), ErrorCode::kInvalidArgument,
            who + "members differ in length");
    Require(std::abs(m.samples.front().t - first.samples.front().t) <= kTimestampTolerance,
            ErrorCode::kInvalidArgument, who + "members span different time windows");
  }
}

void ValidateDataset(const Dataset& d) {
  Require(!d.feature_spec.empty(), ErrorCode::kInvalidArgument, "empty feature_spec");
  for (const auto& name : d.feature_spec) {
    Require(std::find(kKnownFeatures.begin(), kKnownFeatures.end(), name) !=
                kKnownFeatures.end(),
            ErrorCode::kInvalidArgument, "unknown feature '" + name + "'");
  }
  if (d.normalization) {
    Require(d.normalization->shift.size() == d.feature_spec.size() &&
                d.normalization->scale.size() == d.feature_spec.size(),
            ErrorCode::kInvalidArgument, "normalization arity differs from feature_spec");
    for (double s : d.normalization->scale)
      Require(s > 0.0, ErrorCode::kInvalidArgument, "normalization scale must be > 0");
  }
  for (const auto& f : d.flows) ValidateFlow(f);
}

Trajectory ResampleToLength(const Trajectory& t, std::size_t steps) {
  Require(steps > 0, ErrorCode::kInvalidArgument, "resample length must be positive");
  Require(!t.samples.empty(), ErrorCode::kInvalidArgument,
          "cannot resample an empty trajectory");
  if (t.samples.size() == steps) return t;
  Trajectory out;
  out.vehicle_id = t.vehicle_id;
  out.samples.resize(steps);
  const std::size_t n = t.samples.size();
  if (n == 1) {
    out.rate_hz = t.rate_hz;
    for (std::size_t k = 0; k < steps; ++k) {
      out.samples[k] = t.samples[0];
      out.samples[k].t = t.samples[0].t + static_cast<double>(k) / t.rate_hz;
    }
    return out;
  }
  out.rate_hz = steps > 1 ? t.rate_hz * static_cast<double>(steps - 1) /
                                static_cast<double>(n - 1)
                          : t.rate_hz;
  for (std::size_t k = 0; k < steps; ++k) {
    // Position in source-index space; exact integers when n == steps.
    const double u = steps > 1 ? static_cast<double>(k * (n - 1)) /
                                     static_cast<double>(steps - 1)
                               : 0.0;
    std::size_t i = static_cast<std::size_t>(std::floor(u));
    double frac = u - static_cast<double>(i);
    if (i >= n - 1) {
      i = n - 1;
      frac = 0.0;
    }
    const Sample& a = t.samples[i];
    if (frac == 0.0) {
      out.samples[k] = a;
      continue;
    }
    const Sample& b = t.samples[i + 1];
    auto lerp = [frac](double p, double q) { return p + frac * (q - p); };
    out.samples[k] = {lerp(a.t, b.t), lerp(a.x, b.x), lerp(a.y, b.y),
                      lerp(a.speed, b.speed)};
  }
  return out;
}

double FeatureValue(const Sample& s, std::string_view name) {
  if (name == "x") return s.x;
  if (name == "y") return s.y;
  if (name == "speed") return s.speed;
  Fail(ErrorCode::kInvalidArgument, "unknown feature '" + std::string(name) + "'");
}

Normalization FitNormalizer(const Dataset& train) {
  Require(!train.flows.empty(), ErrorCode::kInvalidArgument,
          "cannot fit a normalizer on an empty dataset");
  const std::size_t d = train.feature_spec.size();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& flow : train.flows)
    for (const auto& member : flow.members)
      for (const auto& s : member.samples)
        for (std::size_t j = 0; j < d; ++j) {
          const double v = FeatureValue(s, train.feature_spec[j]);
          lo[j] = std::min(lo[j], v);
          hi[j] = std::max(hi[j], v);
        }
  Normalization norm;
  norm.shift.resize(d);
  norm.scale.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    Require(std::isfinite(lo[j]) && std::isfinite(hi[j]), ErrorCode::kInvalidArgument,
            "training data has no samples");
    norm.shift[j] = 0.5 * (lo[j] + hi[j]);
    const double half_range = 0.5 * (hi[j] - lo[j]);
    norm.scale[j] = half_range > 0.0 ? half_range : 1.0;
  }
  return norm;
}

FeatureWindow ToWindow(const Trajectory& t, const FeatureSpec& spec,
                       const Normalization& norm) {
  Require(norm.shift.size() == spec.size() && norm.scale.size() == spec.size(),
          ErrorCode::kInvalidArgument, "normalization arity differs from feature_spec");
  FeatureWindow w(t.samples.size(), spec.size());
  for (std::size_t j = 0; j < spec.size(); ++j) {
    FeatureValue(Sample{}, spec[j]);  // reject unknown names up front
  }
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    for (std::size_t j = 0; j < spec.size(); ++j) {
      const double v = (FeatureValue(t.samples[i], spec[j]) - norm.shift[j]) / norm.scale[j];
      w(i, j) = std::clamp(v, -kWindowClip, kWindowClip);
    }
  }
  return w;
}

std::array<std::size_t, 3> SplitSizes(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> frac = {f.train, f.calibration, f.test};
  double sum = 0.0;
  for (double v : frac) {
    Require(std::isfinite(v) && v >= 0.0, ErrorCode::kInvalidArgument,
            "split fractions must be nonnegative");
    sum += v;
  }
  Require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
          "split fractions must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double share = frac[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(share));
    remainder[i] = share - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order = {2, 1, 0};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
    if (frac[order[k]] == 0.0) continue;
    ++sizes[order[k]];
    ++assigned;
  }
  return sizes;
}

DatasetSplit SplitDataset(const Dataset& d, const SplitFractions& fractions,
                          std::uint64_t seed) {
  const auto sizes = SplitSizes(d.flows.size(), fractions);
  std::vector<std::size_t> order(d.flows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  for (Dataset* part : {&split.train, &split.calibration, &split.test}) {
    part->feature_spec = d.feature_spec;
    part->normalization = d.normalization;
    part->rate_hz = d.rate_hz;
    part->steps = d.steps;
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) split.train.flows.push_back(d.flows[order[k++]]);
  for (std::size_t i = 0; i < sizes[1]; ++i)
    split.calibration.flows.push_back(d.flows[order[k++]]);
  for (std::size_t i = 0; i < sizes[2]; ++i) split.test.flows.push_back(d.flows[order[k++]]);

  std::vector<FleetFlow> kept;
  for (auto& flow : split.train.flows) {
    if (flow.label == Label::kAbnormal) {
      split.warnings.push_back("abnormal flow '" + flow.flow_id +
                               "' moved from train to calibration");
      split.calibration.flows.push_back(std::move(flow));
    } else {
      kept.push_back(std::move(flow));
    }
  }
  split.train.flows = std::move(kept);
  return split;
}

}  // namespace flowsiam
