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
#include <cstdio>
#include <numbers>
#include <numeric>

#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"
#include "flowsiam/simgen.hpp"

namespace flowsiam::sim {
namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

template <std::size_t N>
std::size_t WeightedChoice(const std::array<double, N>& weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> u(0.0, total);
  const double r = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    acc += weights[i];
    if (r < acc && weights[i] > 0.0) return i;
  }
  for (std::size_t i = N; i-- > 0;)
    if (weights[i] > 0.0) return i;
  return 0;
}

template <std::size_t N>
void ValidateWeights(const std::array<double, N>& w, const char* what) {
  double total = 0.0;
  for (double v : w) {
    Require(std::isfinite(v) && v >= 0.0, ErrorCode::kInvalidArgument,
            std::string(what) + " weights must be nonnegative");
    total += v;
  }
  Require(total > 0.0, ErrorCode::kInvalidArgument,
          std::string(what) + " weights must have a positive sum");
}

}  // namespace

SpeedClass NormalClass() { return {SpeedClassName::kNormal, 1.0, 0.1, 0.9, 1.1}; }
SpeedClass OverSpeedClass() { return {SpeedClassName::kOverSpeed, 1.25, 0.1, 1.2, 1.3}; }
SpeedClass UnderSpeedClass() { return {SpeedClassName::kUnderSpeed, 0.75, 0.1, 0.7, 0.8}; }

void ValidateSpeedClass(const SpeedClass& c) {
  Require(c.min_mult <= c.mean_mult && c.mean_mult <= c.max_mult,
          ErrorCode::kInvalidArgument, "speed class needs min <= mean <= max");
  Require(c.std_mult >= 0.0, ErrorCode::kInvalidArgument,
          "speed class std must be nonnegative");
}

double SampleTargetSpeed(const SpeedClass& c, double limit, std::mt19937_64& rng) {
  Require(limit > 0.0, ErrorCode::kInvalidArgument, "speed limit must be positive");
  if (c.std_mult <= 0.0) return c.mean_mult * limit;
  std::normal_distribution<double> gauss(c.mean_mult, c.std_mult);
  for (;;) {
    const double mult = gauss(rng);
    if (mult >= c.min_mult && mult <= c.max_mult) return mult * limit;
  }
}

std::string_view ToString(ScenarioType t) {
  switch (t) {
    case ScenarioType::kConstant:
      return "Constant";
    case ScenarioType::kRaise:
      return "Raise";
    case ScenarioType::kDecline:
      return "Decline";
  }
  return "Constant";
}

void ValidateScenario(const Scenario& s) {
  Require(s.limit_before > 0.0 && s.limit_after > 0.0, ErrorCode::kInvalidArgument,
          "scenario limits must be positive");
  switch (s.type) {
    case ScenarioType::kConstant:
      Require(s.limit_after == s.limit_before, ErrorCode::kInvalidArgument,
              "constant scenario must keep its limit");
      break;
    case ScenarioType::kRaise:
      Require(s.limit_after > s.limit_before, ErrorCode::kInvalidArgument,
              "raise scenario must increase the limit");
      break;
    case ScenarioType::kDecline:
      Require(s.limit_after < s.limit_before, ErrorCode::kInvalidArgument,
              "decline scenario must decrease the limit");
      break;
  }
}

std::string_view ToString(StreetShape s) {
  switch (s) {
    case StreetShape::kStraight:
      return "Straight";
    case StreetShape::kCurved:
      return "Curved";
    case StreetShape::kWithTurns:
      return "WithTurns";
  }
  return "Straight";
}

StreetShape ParseStreetShape(std::string_view text) {
  if (text == "Straight") return StreetShape::kStraight;
  if (text == "Curved") return StreetShape::kCurved;
  if (text == "WithTurns") return StreetShape::kWithTurns;
  Fail(ErrorCode::kParse, "unknown street shape '" + std::string(text) + "'");
}

void ValidateStreet(const StreetProfile& s) {
  const std::string who = "street '" + s.street_id + "': ";
  Require(s.length > 0.0, ErrorCode::kInvalidArgument, who + "length must be positive");
  Require(s.speed_limit > 0.0, ErrorCode::kInvalidArgument,
          who + "speed limit must be positive");
  Require(s.lanes >= 1, ErrorCode::kInvalidArgument, who + "needs at least one lane");
  Require(s.curve_radius > 0.0 && s.turn_segment > 0.0, ErrorCode::kInvalidArgument,
          who + "curve radius and turn segment must be positive");
}

std::array<double, 2> StreetPoint(const StreetProfile& street, double s, double lateral) {
  double heading = street.heading_deg * kDegree;
  double x = street.origin_x;
  double y = street.origin_y;
  switch (street.shape) {
    case StreetShape::kStraight:
      x += s * std::cos(heading);
      y += s * std::sin(heading);
      break;
    case StreetShape::kCurved: {
      const double r = street.curve_radius;
      const double cx = x - r * std::sin(heading);
      const double cy = y + r * std::cos(heading);
      heading += s / r;
      x = cx + r * std::sin(heading);
      y = cy - r * std::cos(heading);
      break;
    }
    case StreetShape::kWithTurns: {
      double remaining = s;
      int turn = 0;
      while (remaining > street.turn_segment) {
        x += street.turn_segment * std::cos(heading);
        y += street.turn_segment * std::sin(heading);
        remaining -= street.turn_segment;
        heading += (turn % 2 == 0 ? 90.0 : -90.0) * kDegree;
        ++turn;
      }
      x += remaining * std::cos(heading);
      y += remaining * std::sin(heading);
      break;
    }
  }
  return {x - lateral * std::sin(heading), y + lateral * std::cos(heading)};
}

StreetProfile TrainingStreet() {
  StreetProfile s;
  s.street_id = "training";
  s.length = 3000.0;
  s.lanes = 2;
  s.speed_limit = 50.0 * kKmh;
  s.shape = StreetShape::kStraight;
  return s;
}

std::vector<StreetProfile> EvaluationStreets() {
  StreetProfile turns;
  turns.street_id = "path1";
  turns.length = 2500.0;
  turns.lanes = 1;
  turns.speed_limit = 40.0 * kKmh;
  turns.shape = StreetShape::kWithTurns;
  turns.turn_segment = 250.0;

  StreetProfile curved;
  curved.street_id = "path2";
  curved.length = 5000.0;
  curved.lanes = 2;
  curved.speed_limit = 50.0 * kKmh;
  curved.shape = StreetShape::kCurved;
  curved.heading_deg = 20.0;
  curved.curve_radius = 1200.0;

  StreetProfile straight;
  straight.street_id = "path3";
  straight.length = 3000.0;
  straight.lanes = 2;
  straight.speed_limit = 50.0 * kKmh;
  straight.shape = StreetShape::kStraight;

  StreetProfile southbound;
  southbound.street_id = "path4";
  southbound.length = 4000.0;
  southbound.lanes = 3;
  southbound.speed_limit = 80.0 * kKmh;
  southbound.shape = StreetShape::kStraight;
  southbound.heading_deg = -90.0;

  return {turns, curved, straight, southbound};
}

void ValidateConfig(const GeneratorConfig& cfg) {
  Require(cfg.fleet_size >= 2, ErrorCode::kInvalidArgument, "fleet size must be >= 2");
  Require(cfg.steps >= 1, ErrorCode::kInvalidArgument, "T must be >= 1");
  Require(cfg.rate_hz > 0.0, ErrorCode::kInvalidArgument, "rate_hz must be positive");
  Require(!cfg.streets.empty(), ErrorCode::kInvalidArgument, "streets list is empty");
  for (const auto& s : cfg.streets) ValidateStreet(s);
  ValidateWeights<3>({cfg.scenario_mix.constant, cfg.scenario_mix.raise,
                      cfg.scenario_mix.decline},
                     "scenario_mix");
  Require(cfg.abnormal_fraction >= 0.0 && cfg.abnormal_fraction <= 1.0,
          ErrorCode::kInvalidArgument, "abnormal_fraction must lie in [0, 1]");
  if (cfg.abnormal_fraction > 0.0)
    ValidateWeights<2>({cfg.abnormal_kind_mix.over_speed, cfg.abnormal_kind_mix.under_speed},
                       "abnormal_kind_mix");
  Require(cfg.min_gap > 0.0, ErrorCode::kInvalidArgument, "min_gap must be positive");
  Require(cfg.accel_limit > 0.0, ErrorCode::kInvalidArgument,
          "accel_limit must be positive");
  Require(cfg.raise_factor > 1.0 && cfg.decline_factor > 0.0 && cfg.decline_factor < 1.0,
          ErrorCode::kInvalidArgument,
          "raise_factor must exceed 1 and decline_factor lie in (0, 1)");
  Require(cfg.headway_min > 0.0 && cfg.headway_max >= cfg.headway_min,
          ErrorCode::kInvalidArgument, "invalid headway range");
  ValidateSpeedClass(cfg.normal);
  ValidateSpeedClass(cfg.over_speed);
  ValidateSpeedClass(cfg.under_speed);
}

std::mt19937_64 FlowStream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag), 0x5eedf10U};
  return std::mt19937_64(seq);
}

Scenario MakeScenario(const GeneratorConfig& cfg, const StreetProfile& street,
                      ScenarioType type) {
  Scenario s;
  s.type = type;
  s.change_time = cfg.change_time;
  s.limit_before = street.speed_limit;
  switch (type) {
    case ScenarioType::kConstant:
      s.limit_after = street.speed_limit;
      break;
    case ScenarioType::kRaise:
      s.limit_after = street.speed_limit * cfg.raise_factor;
      break;
    case ScenarioType::kDecline:
      s.limit_after = street.speed_limit * cfg.decline_factor;
      break;
  }
  return s;
}

FleetFlow GenerateFleet(const GeneratorConfig& cfg, const StreetProfile& street,
                        const Scenario& scenario, const std::optional<AnomalySpec>& abnormal,
                        std::mt19937_64& rng, const std::string& flow_id) {
  const std::size_t m = cfg.fleet_size;
  Require(m >= 2, ErrorCode::kInvalidArgument, "fleet size must be >= 2");
  ValidateScenario(scenario);
  ValidateStreet(street);
  if (abnormal)
    Require(abnormal->member < m, ErrorCode::kInvalidArgument,
            "abnormal member index out of range");

  // Target multipliers of the current limit.
  std::vector<double> mult(m);
  for (std::size_t i = 0; i < m; ++i) {
    SpeedClass cls = cfg.normal;
    if (abnormal && abnormal->member == i)
      cls = abnormal->kind == AnomalyKind::kOverSpeed ? cfg.over_speed : cfg.under_speed;
    mult[i] = SampleTargetSpeed(cls, 1.0, rng);
  }

  // Front-to-back order: fastest first.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mult[a] > mult[b]; });

  const double limit0 = scenario.LimitAt(0.0);
  std::vector<double> pos(m, 0.0);
  std::vector<double> vel(m, 0.0);
  std::vector<std::size_t> lane(m, 0);
  std::vector<std::ptrdiff_t> leader(m, -1);
  std::vector<std::ptrdiff_t> lane_tail(street.lanes, -1);
  std::uniform_real_distribution<double> headway(cfg.headway_min, cfg.headway_max);
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t i = order[rank];
    lane[i] = rank % street.lanes;
    vel[i] = mult[i] * limit0;
    const std::ptrdiff_t ahead = lane_tail[lane[i]];
    if (ahead >= 0) {
      pos[i] = pos[ahead] - std::max(cfg.min_gap, headway(rng) * vel[i]);
      leader[i] = ahead;
    }
    lane_tail[lane[i]] = static_cast<std::ptrdiff_t>(i);
  }
  const double rear = *std::min_element(pos.begin(), pos.end());
  for (double& p : pos) p -= rear;

  FleetFlow flow;
  flow.flow_id = flow_id;
  flow.street_id = street.street_id;
  flow.label = abnormal ? Label::kAbnormal : Label::kNormal;
  if (abnormal) flow.anomaly_kind = abnormal->kind;
  flow.members.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "v%02zu", i);
    flow.members[i].vehicle_id = id;
    flow.members[i].rate_hz = cfg.rate_hz;
    flow.members[i].samples.reserve(cfg.steps);
  }

  const double dt = 1.0 / cfg.rate_hz;
  const double max_dv = cfg.accel_limit * dt;
  bool street_end = false;
  std::vector<double> next_pos(m);
  std::vector<double> next_vel(m);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (std::size_t i = 0; i < m; ++i) {
      const double lateral =
          (static_cast<double>(lane[i]) - 0.5 * static_cast<double>(street.lanes - 1)) *
          cfg.lane_width;
      const auto xy = StreetPoint(street, pos[i], lateral);
      flow.members[i].samples.push_back({t, xy[0], xy[1], vel[i]});
    }
    if (k + 1 == cfg.steps) break;
    const double limit = scenario.LimitAt(t);
    for (std::size_t i : order) {
      const double desired = mult[i] * limit;
      double v = vel[i] + std::clamp(desired - vel[i], -max_dv, max_dv);
      v = std::max(v, 0.0);
      double p = pos[i] + 0.5 * (vel[i] + v) * dt;
      if (leader[i] >= 0) {
        const auto l = static_cast<std::size_t>(leader[i]);
        const double bound = next_pos[l] - cfg.min_gap;
        if (p > bound) {
          p = std::max(bound, pos[i]);
          v = std::min(v, next_vel[l]);
        }
      }
      if (p >= street.length) {
        p = street.length;
        v = 0.0;
        street_end = true;
      }
      next_pos[i] = p;
      next_vel[i] = v;
    }
    pos = next_pos;
    vel = next_vel;
  }
  if (street_end) flow.flags.push_back("street_end_reached");
  return flow;
}

Dataset GenerateDataset(const GeneratorConfig& cfg) {
  ValidateConfig(cfg);
  const std::size_t n = cfg.flows;
  const auto n_abnormal = static_cast<std::size_t>(
      std::llround(cfg.abnormal_fraction * static_cast<double>(n)));

  std::vector<char> is_abnormal(n, 0);
  for (std::size_t i = 0; i < n_abnormal; ++i) is_abnormal[i] = 1;
  std::mt19937_64 assign = FlowStream(cfg.seed, 0, /*tag=*/1);
  std::shuffle(is_abnormal.begin(), is_abnormal.end(), assign);

  Dataset d;
  d.feature_spec = cfg.feature_spec;
  d.rate_hz = cfg.rate_hz;
  d.steps = cfg.steps;
  d.flows.resize(n);
  ParallelFor(n, [&](std::size_t i) {
    std::mt19937_64 rng = FlowStream(cfg.seed, i);
    const StreetProfile& street = cfg.streets[i % cfg.streets.size()];
    const auto type = static_cast<ScenarioType>(WeightedChoice<3>(
        {cfg.scenario_mix.constant, cfg.scenario_mix.raise, cfg.scenario_mix.decline}, rng));
    std::optional<AnomalySpec> abnormal;
    if (is_abnormal[i]) {
      AnomalySpec spec;
      spec.kind = WeightedChoice<2>({cfg.abnormal_kind_mix.over_speed,
                                     cfg.abnormal_kind_mix.under_speed},
                                    rng) == 0
                      ? AnomalyKind::kOverSpeed
                      : AnomalyKind::kUnderSpeed;
      spec.member = std::uniform_int_distribution<std::size_t>(0, cfg.fleet_size - 1)(rng);
      abnormal = spec;
    }
    char id[64];
    std::snprintf(id, sizeof(id), "%s%05zu", cfg.flow_prefix.c_str(), i);
    d.flows[i] = GenerateFleet(cfg, street, MakeScenario(cfg, street, type), abnormal, rng, id);
  });
  return d;
}

}  // namespace flowsiam::sim
