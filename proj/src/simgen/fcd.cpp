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
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "flowsiam/error.hpp"
#include "flowsiam/simgen.hpp"

namespace flowsiam::sim {
namespace {

struct Record {
  double time = 0.0;
  std::string vehicle_id;
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;
  std::string where;  // for error messages
};

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double ParseReal(const std::string& text, const std::string& where, const char* field) {
  const std::string t = Trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  Require(ec == std::errc() && ptr == t.data() + t.size() && !t.empty() && std::isfinite(v),
          ErrorCode::kParse, where + ": bad " + field + " value '" + t + "'");
  return v;
}

std::string FormatReal(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void CheckOrder(const std::vector<Record>& records) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    Require(records[i].time >= records[i - 1].time, ErrorCode::kParse,
            records[i].where + ": timestamp " + FormatReal(records[i].time) +
                " is out of order (previous " + FormatReal(records[i - 1].time) + ")");
  }
}

// Groups vehicles into fleets by order of first appearance and crops each
// fleet to the interval where all its members are present.
FcdImport Assemble(const std::vector<Record>& records, std::size_t fleet_size,
                   std::size_t steps) {
  Require(fleet_size >= 2, ErrorCode::kInvalidArgument, "fleet size must be >= 2");
  Require(steps >= 1, ErrorCode::kInvalidArgument, "T must be >= 1");
  Require(!records.empty(), ErrorCode::kParse, "floating-car data has no records");
  CheckOrder(records);

  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < records.size(); ++i) {
    const double d = records[i].time - records[i - 1].time;
    if (d > kTimestampTolerance) dt = std::min(dt, d);
  }
  Require(std::isfinite(dt), ErrorCode::kParse,
          "floating-car data needs at least two distinct timestamps");
  const double rate = 1.0 / dt;

  std::vector<std::string> order;
  std::map<std::string, std::vector<Sample>> tracks;
  for (const auto& r : records) {
    auto [it, inserted] = tracks.try_emplace(r.vehicle_id);
    if (inserted) order.push_back(r.vehicle_id);
    auto& track = it->second;
    if (!track.empty()) {
      const double gap = r.time - track.back().t;
      Require(std::abs(gap - dt) <= kTimestampTolerance, ErrorCode::kParse,
              r.where + ": vehicle '" + r.vehicle_id + "' is not sampled every " +
                  FormatReal(dt) + " s");
    }
    Require(r.speed >= 0.0, ErrorCode::kParse, r.where + ": negative speed");
    track.push_back({r.time, r.x, r.y, r.speed});
  }

  FcdImport result;
  Dataset& d = result.dataset;
  d.rate_hz = rate;
  d.steps = steps;
  std::size_t next = 0;
  std::size_t flow_index = 0;
  while (next + fleet_size <= order.size()) {
    std::vector<std::string> group(order.begin() + static_cast<std::ptrdiff_t>(next),
                                   order.begin() + static_cast<std::ptrdiff_t>(next + fleet_size));
    next += fleet_size;
    double start = -std::numeric_limits<double>::infinity();
    double stop = std::numeric_limits<double>::infinity();
    for (const auto& id : group) {
      start = std::max(start, tracks[id].front().t);
      stop = std::min(stop, tracks[id].back().t);
    }
    if (start > stop + kTimestampTolerance) {
      result.warnings.push_back("vehicles " + group.front() + ".." + group.back() +
                                " are never co-present; window skipped");
      continue;
    }
    FleetFlow flow;
    char id[32];
    std::snprintf(id, sizeof(id), "fcd%05zu", flow_index++);
    flow.flow_id = id;
    flow.street_id = "fcd";
    flow.label = Label::kNormal;
    flow.flags.push_back("unlabeled_import");
    for (const auto& vid : group) {
      Trajectory t;
      t.vehicle_id = vid;
      t.rate_hz = rate;
      for (const auto& s : tracks[vid]) {
        if (s.t < start - kTimestampTolerance || s.t > stop + kTimestampTolerance) continue;
        Sample rebased = s;
        rebased.t = s.t - start;
        t.samples.push_back(rebased);
      }
      flow.members.push_back(ResampleToLength(t, steps));
    }
    d.rate_hz = flow.members.front().rate_hz;
    d.flows.push_back(std::move(flow));
  }
  if (next < order.size()) {
    result.warnings.push_back(std::to_string(order.size() - next) +
                              " trailing vehicle(s) do not fill a fleet of " +
                              std::to_string(fleet_size) + "; skipped");
  }
  return result;
}

}  // namespace

FcdImport ImportFcdCsv(std::istream& in, std::size_t fleet_size, std::size_t steps) {
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
          "floating-car CSV is empty");
  std::string header = Trim(line);
  header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
  Require(header == "time,vehicle_id,x,y,speed", ErrorCode::kParse,
          "floating-car CSV header must be time,vehicle_id,x,y,speed");
  std::vector<Record> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    Require(fields.size() == 5, ErrorCode::kParse,
            where + ": expected 5 fields, got " + std::to_string(fields.size()));
    Record r;
    r.where = where;
    r.time = ParseReal(fields[0], where, "time");
    r.vehicle_id = Trim(fields[1]);
    Require(!r.vehicle_id.empty(), ErrorCode::kParse, where + ": empty vehicle_id");
    r.x = ParseReal(fields[2], where, "x");
    r.y = ParseReal(fields[3], where, "y");
    r.speed = ParseReal(fields[4], where, "speed");
    records.push_back(std::move(r));
  }
  return Assemble(records, fleet_size, steps);
}

FcdImport ImportFcdXml(std::istream& in, std::size_t fleet_size, std::size_t steps) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    Fail(ErrorCode::kParse, std::string("floating-car XML: ") + e.what());
  }
  const auto root = tree.get_child_optional("fcd-export");
  Require(static_cast<bool>(root), ErrorCode::kParse,
          "floating-car XML needs an <fcd-export> root");
  std::vector<Record> records;
  std::size_t step_index = 0;
  for (const auto& [tag, node] : *root) {
    if (tag != "timestep") continue;
    const std::string where_step = "timestep " + std::to_string(step_index++);
    const double time =
        ParseReal(node.get<std::string>("<xmlattr>.time", ""), where_step, "time");
    for (const auto& [vtag, vnode] : node) {
      if (vtag != "vehicle") continue;
      Record r;
      r.time = time;
      r.vehicle_id = vnode.get<std::string>("<xmlattr>.id", "");
      r.where = where_step + " vehicle '" + r.vehicle_id + "'";
      Require(!r.vehicle_id.empty(), ErrorCode::kParse, where_step + ": vehicle without id");
      r.x = ParseReal(vnode.get<std::string>("<xmlattr>.x", ""), r.where, "x");
      r.y = ParseReal(vnode.get<std::string>("<xmlattr>.y", ""), r.where, "y");
      r.speed = ParseReal(vnode.get<std::string>("<xmlattr>.speed", ""), r.where, "speed");
      records.push_back(std::move(r));
    }
  }
  return Assemble(records, fleet_size, steps);
}

FcdImport ImportFcd(const std::string& path, std::size_t fleet_size, std::size_t steps) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "'");
  const bool xml = path.size() >= 4 && path.compare(path.size() - 4, 4, ".xml") == 0;
  return xml ? ImportFcdXml(in, fleet_size, steps) : ImportFcdCsv(in, fleet_size, steps);
}

void ExportFcdCsv(const Dataset& d, std::ostream& out) {
  out << "time,vehicle_id,x,y,speed\n";
  double offset = 0.0;
  for (const auto& flow : d.flows) {
    Require(!flow.members.empty(), ErrorCode::kInvalidArgument, "flow without members");
    const double rate = flow.members.front().rate_hz;
    const std::size_t n = flow.members.front().samples.size();
    const double t0 = flow.members.front().samples.front().t;
    for (std::size_t k = 0; k < n; ++k) {
      for (const auto& m : flow.members) {
        const Sample& s = m.samples.at(k);
        out << FormatReal(offset + (s.t - t0)) << ',' << flow.flow_id << '/' << m.vehicle_id
            << ',' << FormatReal(s.x) << ',' << FormatReal(s.y) << ',' << FormatReal(s.speed)
            << '\n';
      }
    }
    // One idle step keeps consecutive fleets from overlapping.
    offset += static_cast<double>(n + 1) / rate;
  }
}

}  // namespace flowsiam::sim
