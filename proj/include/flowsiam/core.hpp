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

// Domain types shared by every stage: per-vehicle trajectories, fleets of
// co-driving vehicles, labelled datasets, and the normalised fixed-length
// windows the autoencoder consumes.

#ifndef FLOWSIAM_CORE_HPP_
#define FLOWSIAM_CORE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowsiam/neuralnet.hpp"

namespace flowsiam {

struct Sample {
  double t = 0.0;      // s
  double x = 0.0;      // m
  double y = 0.0;      // m
  double speed = 0.0;  // m/s

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Trajectory {
  std::string vehicle_id;
  std::vector<Sample> samples;
  double rate_hz = 1.0;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class Label { kNormal, kAbnormal };
enum class AnomalyKind { kOverSpeed, kUnderSpeed };

std::string_view ToString(Label label);
std::string_view ToString(AnomalyKind kind);
Label ParseLabel(std::string_view text);
AnomalyKind ParseAnomalyKind(std::string_view text);

struct FleetFlow {
  std::string flow_id;
  std::vector<Trajectory> members;
  Label label = Label::kNormal;
  std::string street_id;
  std::optional<AnomalyKind> anomaly_kind;
  // Provenance notes such as "street_end_reached" or "unlabeled_import".
  std::vector<std::string> flags;

  friend bool operator==(const FleetFlow&, const FleetFlow&) = default;
};

// Per-feature affine map value -> (value - shift) / scale.
struct Normalization {
  std::vector<double> shift;
  std::vector<double> scale;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

using FeatureSpec = std::vector<std::string>;

// Names accepted in a FeatureSpec.
inline constexpr std::array<std::string_view, 3> kKnownFeatures = {"x", "y", "speed"};
FeatureSpec DefaultFeatureSpec();

struct Dataset {
  std::vector<FleetFlow> flows;
  FeatureSpec feature_spec = DefaultFeatureSpec();
  std::optional<Normalization> normalization;
  double rate_hz = 1.0;
  std::size_t steps = 60;  // T

  std::size_t TrajectoryCount() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// T x d matrix of normalised features.
using FeatureWindow = nn::Matrix;

inline constexpr double kTimestampTolerance = 1e-6;
inline constexpr double kWindowClip = 1.5;

// Throws kInvalidArgument describing the first violated invariant.
void ValidateTrajectory(const Trajectory& t);
void ValidateFlow(const FleetFlow& flow);
void ValidateDataset(const Dataset& d);

// Linear interpolation onto `steps` evenly spaced points spanning the
// trajectory's first to last sample. A single-sample trajectory is held
// constant. Resampling a trajectory that already has `steps` samples returns
// it unchanged.
Trajectory ResampleToLength(const Trajectory& t, std::size_t steps);

// Feature value of one sample by name; throws on unknown names.
double FeatureValue(const Sample& s, std::string_view name);

// Min-max fit mapping each feature's training range onto [-1, 1]. Constant
// features get scale 1.
Normalization FitNormalizer(const Dataset& train);

// Normalised window, clipped to [-kWindowClip, kWindowClip].
FeatureWindow ToWindow(const Trajectory& t, const FeatureSpec& spec,
                       const Normalization& norm);

struct SplitFractions {
  double train = 0.0;
  double calibration = 0.0;
  double test = 0.0;
};

struct DatasetSplit {
  Dataset train;
  Dataset calibration;
  Dataset test;
  std::vector<std::string> warnings;
};

// Split sizes: floor of each share, remaining flows handed out by largest
// fractional remainder (ties to the later split). Abnormal flows landing in
// train are moved to calibration with a warning.
std::array<std::size_t, 3> SplitSizes(std::size_t n, const SplitFractions& f);
DatasetSplit SplitDataset(const Dataset& d, const SplitFractions& fractions,
                          std::uint64_t seed);

// JSON dataset files.
void SaveDataset(const Dataset& d, const std::string& path);
Dataset LoadDataset(const std::string& path);
std::string DatasetToJson(const Dataset& d);
Dataset DatasetFromJson(const std::string& text);

}  // namespace flowsiam

#endif  // FLOWSIAM_CORE_HPP_
