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

// Seeded generator of labelled fleet-trajectory corpora and an importer for
// externally simulated floating-car data.

#ifndef FLOWSIAM_SIMGEN_HPP_
#define FLOWSIAM_SIMGEN_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flowsiam/core.hpp"

namespace flowsiam::sim {

inline constexpr double kKmh = 1.0 / 3.6;  // km/h -> m/s

enum class SpeedClassName { kNormal, kOverSpeed, kUnderSpeed };

// Target speed distribution as multipliers of the street speed limit.
struct SpeedClass {
  SpeedClassName name = SpeedClassName::kNormal;
  double mean_mult = 1.0;
  double std_mult = 0.1;
  double min_mult = 0.9;
  double max_mult = 1.1;
};

SpeedClass NormalClass();
SpeedClass OverSpeedClass();
SpeedClass UnderSpeedClass();
void ValidateSpeedClass(const SpeedClass& c);

// Gaussian(mean, std) * limit truncated by rejection to [min, max] * limit.
// A non-positive std returns mean * limit.
double SampleTargetSpeed(const SpeedClass& c, double limit, std::mt19937_64& rng);

enum class ScenarioType { kConstant, kRaise, kDecline };

struct Scenario {
  ScenarioType type = ScenarioType::kConstant;
  double change_time = 30.0;  // s
  double limit_before = 0.0;  // m/s
  double limit_after = 0.0;   // m/s

  double LimitAt(double t) const {
    return type == ScenarioType::kConstant || t < change_time ? limit_before : limit_after;
  }
};

void ValidateScenario(const Scenario& s);
std::string_view ToString(ScenarioType t);

enum class StreetShape { kStraight, kCurved, kWithTurns };

struct StreetProfile {
  std::string street_id;
  double length = 3000.0;  // m
  unsigned lanes = 1;
  double speed_limit = 50.0 * kKmh;  // m/s
  StreetShape shape = StreetShape::kStraight;
  double heading_deg = 0.0;     // initial heading, counter-clockwise from +x
  double curve_radius = 1500.0;  // kCurved: left-turning arc radius
  double turn_segment = 250.0;   // kWithTurns: length between alternating 90 degree turns
  double origin_x = 0.0;
  double origin_y = 0.0;
};

void ValidateStreet(const StreetProfile& s);
std::string_view ToString(StreetShape s);
StreetShape ParseStreetShape(std::string_view text);

// World position of arc length `s` along the centreline, offset `lateral`
// metres to the left of the direction of travel.
std::array<double, 2> StreetPoint(const StreetProfile& street, double s, double lateral);

// The straight two-lane 50 km/h street used for training corpora.
StreetProfile TrainingStreet();
// Four evaluation streets: one lane with turns at 40 km/h, a long two-lane
// curve at 50 km/h, a straight two-lane street at 50 km/h, and a three-lane
// north-to-south road at 80 km/h.
std::vector<StreetProfile> EvaluationStreets();

struct ScenarioMix {
  double constant = 1.0;
  double raise = 1.0;
  double decline = 1.0;
};

struct AnomalyMix {
  double over_speed = 1.0;
  double under_speed = 1.0;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t fleet_size = 5;  // m
  std::size_t steps = 60;      // T
  double rate_hz = 1.0;
  std::size_t flows = 100;
  std::vector<StreetProfile> streets = {TrainingStreet()};
  ScenarioMix scenario_mix;
  double abnormal_fraction = 0.0;
  AnomalyMix abnormal_kind_mix;
  double min_gap = 7.5;      // m
  double accel_limit = 2.0;  // m/s^2
  // Raise and Decline switch the limit at change_time to limit * factor.
  double change_time = 30.0;
  double raise_factor = 1.6;
  double decline_factor = 0.625;
  // Initial time headway between consecutive vehicles in a lane, seconds.
  double headway_min = 1.5;
  double headway_max = 3.0;
  double lane_width = 3.5;
  SpeedClass normal = NormalClass();
  SpeedClass over_speed = OverSpeedClass();
  SpeedClass under_speed = UnderSpeedClass();
  FeatureSpec feature_spec = DefaultFeatureSpec();
  std::string flow_prefix = "flow";
};

void ValidateConfig(const GeneratorConfig& cfg);

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kOverSpeed;
  std::size_t member = 0;
};

// Independent stream for flow `index`; serial and parallel generation draw
// identical numbers.
std::mt19937_64 FlowStream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0);

Scenario MakeScenario(const GeneratorConfig& cfg, const StreetProfile& street,
                      ScenarioType type);

// Kinematic rollout of one fleet. Vehicles are placed front to back in
// descending order of target speed, lanes assigned round-robin, and every
// vehicle tracks target_mult * current limit under the acceleration bound
// while keeping at least min_gap behind its lane leader.
FleetFlow GenerateFleet(const GeneratorConfig& cfg, const StreetProfile& street,
                        const Scenario& scenario, const std::optional<AnomalySpec>& abnormal,
                        std::mt19937_64& rng, const std::string& flow_id);

Dataset GenerateDataset(const GeneratorConfig& cfg);

// Floating-car data. CSV: header time,vehicle_id,x,y,speed with rows sorted by
// time. XML: <fcd-export><timestep time=".."><vehicle id x y speed/>...
struct FcdImport {
  Dataset dataset;
  std::vector<std::string> warnings;
};

FcdImport ImportFcd(const std::string& path, std::size_t fleet_size, std::size_t steps);
FcdImport ImportFcdCsv(std::istream& in, std::size_t fleet_size, std::size_t steps);
FcdImport ImportFcdXml(std::istream& in, std::size_t fleet_size, std::size_t steps);

// Writes every flow as CSV floating-car data, flows separated in time so that
// ImportFcdCsv regroups them into the same fleets.
void ExportFcdCsv(const Dataset& d, std::ostream& out);

}  // namespace flowsiam::sim

#endif  // FLOWSIAM_SIMGEN_HPP_
