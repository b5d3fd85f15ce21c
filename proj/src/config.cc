// Copyright 2026 The cnsc-sim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cnsc/config.h"

#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "json.hpp"

namespace cnsc {

using nlohmann::ordered_json;

void ConstellationConfig::Validate() const {
  if (geo_count < 0 || meo_count < 0) {
    throw ValidationError("constellation.geo_count and meo_count must be >= 0");
  }
  if (meo_count > 0 && (meo_planes < 1 || meo_count % meo_planes != 0)) {
    throw ValidationError("constellation.meo_count must be a multiple of meo_planes");
  }
  if (network_size - geo_count - meo_count < 1) {
    throw ValidationError(fmt::format(
        "constellation.network_size {} leaves no LEO satellites after {} GEO and {} MEO",
        network_size, geo_count, meo_count));
  }
  if (leo_planes < 0) throw ValidationError("constellation.leo_planes must be >= 0");
}

std::vector<OrbitShellSpec> ConstellationConfig::Shells() const {
  Validate();
  const int leo = network_size - geo_count - meo_count;
  int planes = leo_planes;
  if (planes == 0) {
    // The divisor of the LEO count closest to sqrt(leo / 1.5), so the shell
    // stays a single uniform Walker pattern.
    const double target = std::sqrt(leo / 1.5);
    planes = 1;
    for (int p = 1; p <= leo; ++p) {
      if (leo % p == 0 && std::abs(p - target) < std::abs(planes - target)) planes = p;
    }
  } else if (leo % planes != 0) {
    throw ValidationError(fmt::format(
        "constellation.leo_planes {} does not divide the {} LEO satellites", planes, leo));
  }
  std::vector<OrbitShellSpec> shells;
  OrbitShellSpec s;
  s.regime = Regime::kLeo;
  s.altitude_km = leo_altitude_km;
  s.inclination_deg = leo_inclination_deg;
  s.plane_count = planes;
  s.sats_per_plane = leo / planes;
  s.phasing_offset_deg = leo_phasing_deg;
  shells.push_back(s);
  if (meo_count > 0) {
    OrbitShellSpec m;
    m.regime = Regime::kMeo;
    m.altitude_km = meo_altitude_km;
    m.inclination_deg = meo_inclination_deg;
    m.plane_count = meo_planes;
    m.sats_per_plane = meo_count / meo_planes;
    shells.push_back(m);
  }
  if (geo_count > 0) {
    OrbitShellSpec g;
    g.regime = Regime::kGeo;
    g.altitude_km = 35786.0;
    g.inclination_deg = 0.0;
    g.plane_count = 1;
    g.sats_per_plane = geo_count;
    shells.push_back(g);
  }
  return shells;
}

void BackgroundConfig::Validate() const {
  if (levels.empty()) throw ValidationError("background.levels must be non-empty");
  for (double l : levels) {
    if (!(l >= 0.0 && l < 1.0)) {
      throw ValidationError("background.levels must lie in [0, 1)");
    }
  }
  if (!(mean_hold_s > 0.0)) throw ValidationError("background.mean_hold_s must be > 0");
  if (!(walk_step_fraction >= 0.0 && walk_step_fraction < 1.0)) {
    throw ValidationError("background.walk_step_fraction must lie in [0, 1)");
  }
  if (!(walk_interval_s > 0.0)) {
    throw ValidationError("background.walk_interval_s must be > 0");
  }
}

void AwarenessConfig::Validate() const {
  policy.Validate();
  if (!(thresholds.moderate_per_s > 0.0 &&
        thresholds.rapid_per_s > thresholds.moderate_per_s)) {
    throw ValidationError(
        "awareness.volatility thresholds must satisfy 0 < moderate_per_s < rapid_per_s");
  }
  if (!(baseline_interval_s > 0.0)) {
    throw ValidationError("awareness.baseline_interval_s must be > 0");
  }
  if (!(monitor_interval_s >= 1.0) || std::floor(monitor_interval_s) != monitor_interval_s) {
    throw ValidationError("awareness.monitor_interval_s must be a whole number >= 1");
  }
  if (!(history_window_s >= monitor_interval_s)) {
    throw ValidationError("awareness.history_window_s must be >= monitor_interval_s");
  }
  if (!(domain_refresh_s > 0.0)) throw ValidationError("awareness.domain_refresh_s must be > 0");
  if (!(staleness_sample_s > 0.0)) {
    throw ValidationError("awareness.staleness_sample_s must be > 0");
  }
  if (missed_reports_degraded < 1) {
    throw ValidationError("awareness.missed_reports_degraded must be >= 1");
  }
}

void ScenarioConfig::Validate() const {
  if (!has_seed) throw ValidationError("missing required field 'seed'");
  if (!(horizon_s > 0.0)) throw ValidationError("horizon_s must be > 0");
  constellation.Validate();
  if (stations.empty()) throw ValidationError("ground_stations must be non-empty");
  for (const GroundStationSpec& s : stations) s.Validate();
  if (targets.empty()) throw ValidationError("targets must be non-empty");
  links.capacity.Validate();
  if (!(links.step_s > 0.0)) throw ValidationError("links.step_s must be > 0");
  if (!(total_compute_gbps > 0.0)) throw ValidationError("compute.total_gbps must be > 0");
  if (!(storage_gb > 0.0)) throw ValidationError("compute.storage_gb must be > 0");
  workload.Validate();
  if (workload.arrival_end > horizon_s) {
    throw ValidationError("workload.arrival_end_s must not exceed horizon_s");
  }
  scheduler.Validate();
  awareness.Validate();
  background.Validate();
}

ContactPlanOptions ScenarioConfig::PlanOptions() const {
  ContactPlanOptions o = links;
  o.horizon_s = horizon_s;
  return o;
}

ScenarioConfig DefaultScenarioConfig() {
  ScenarioConfig c;
  c.name = "default";
  c.seed = 1;
  c.has_seed = true;
  c.stations = {{"beijing", 40.0, 116.3, 10.0},   {"kashgar", 39.5, 76.0, 10.0},
                {"sanya", 18.3, 109.5, 10.0},     {"santiago", -33.4, -70.7, 10.0},
                {"madrid", 40.4, -3.7, 10.0},     {"perth", -31.8, 115.9, 10.0}};
  // Targets lie within a few hundred km of a station, so a sensing pass
  // usually coincides with a ground contact.
  c.targets = {{"north_china_plain", 38.5, 115.5},
               {"tarim_basin", 39.0, 79.0},
               {"central_chile", -34.5, -71.5},
               {"castilla", 40.0, -4.5}};
  c.links.sensing_min_elevation_deg = 10.0;
  c.links.capacity.antennas_per_station = 4;
  c.links.capacity.anchor_link_class = LinkClass::kLaserIsl;
  c.workload.count = 400;
  c.workload.arrival_start = 0.0;
  c.workload.arrival_end = 3 * 3600.0;
  c.fusion.processing_intensity = 20.0;
  c.fusion.fusion_intensity = 20.0;
  c.background.mean_hold_s = 900.0;
  return c;
}

namespace {

// Maps JSON paths ("a.b[2].c") to the line where the key or element
// starts. A small scanner is enough: the document is already known to be
// valid JSON when this runs.
std::map<std::string, int> KeyLines(std::string_view text) {
  std::map<std::string, int> lines;
  struct Frame {
    bool object;
    std::string path;
    int index;
  };
  std::vector<Frame> stack;
  int line = 1;
  std::string pending_key;
  bool expect_key = false;
  auto child_path = [&](const Frame& f, const std::string& key) {
    if (f.object) return f.path.empty() ? key : f.path + "." + key;
    return f.path + "[" + std::to_string(f.index) + "]";
  };
  std::string current;  // path of the value about to start
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\') ++i;
        if (i < text.size()) s.push_back(text[i]);
      }
      if (!stack.empty() && stack.back().object && expect_key) {
        current = child_path(stack.back(), s);
        lines.emplace(current, line);
        expect_key = false;
      }
      continue;
    }
    if (c == '{' || c == '[') {
      std::string path = current;
      if (!stack.empty() && !stack.back().object) {
        path = child_path(stack.back(), "");
        lines.emplace(path, line);
      }
      stack.push_back({c == '{', path, 0});
      expect_key = c == '{';
      continue;
    }
    if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      continue;
    }
    if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object) {
          expect_key = true;
        } else {
          ++stack.back().index;
        }
      }
      continue;
    }
    if (!stack.empty() && !stack.back().object && !std::isspace(static_cast<unsigned char>(c))) {
      lines.emplace(child_path(stack.back(), ""), line);
    }
  }
  return lines;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : lines_(KeyLines(text)) {}

  [[noreturn]] void Fail(const std::string& path, const std::string& what) const {
    auto it = lines_.find(path);
    if (it != lines_.end()) {
      throw ValidationError(fmt::format("line {}: field '{}' {}", it->second, path, what));
    }
    throw ValidationError(fmt::format("field '{}' {}", path, what));
  }

  // Rejects keys the config does not know (typos would silently fall back
  // to defaults otherwise).
  void CheckKeys(const ordered_json& obj, const std::string& path,
                 std::initializer_list<const char*> known) const {
    if (!obj.is_object()) Fail(path, "must be an object");
    std::set<std::string> k(known.begin(), known.end());
    for (const auto& [key, value] : obj.items()) {
      if (!k.count(key)) Fail(Join(path, key), "is not a known setting");
    }
  }

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  template <typename T>
  void Get(const ordered_json& obj, const std::string& path, const char* key, T& out) const {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = Join(path, key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) Fail(p, "must be true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) Fail(p, "must be an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) Fail(p, "must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) Fail(p, "must be a string");
      }
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      Fail(p, std::string("has the wrong type: ") + e.what());
    }
  }

  template <typename Fn>
  void Enum(const ordered_json& obj, const std::string& path, const char* key, Fn parse) const {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = Join(path, key);
    if (!it->is_string()) Fail(p, "must be a string");
    try {
      parse(it->get<std::string>());
    } catch (const ValidationError& e) {
      Fail(p, e.what());
    }
  }

  // Runs `fn`, re-throwing its ValidationError with the field's line.
  template <typename Fn>
  void Check(const std::string& path, Fn fn) const {
    try {
      fn();
    } catch (const ValidationError& e) {
      Fail(path, std::string("is invalid: ") + e.what());
    }
  }

 private:
  std::map<std::string, int> lines_;
};

ordered_json PolicyJson(const ClassPolicy& p) {
  const char* mode = p.mode == ReportMode::kPeriodic      ? "periodic"
                     : p.mode == ReportMode::kEventDriven ? "event_driven"
                                                          : "periodic_or_event";
  return {{"mode", mode},
          {"interval_s", p.interval_s},
          {"event_threshold", p.event_threshold}};
}

}  // namespace

std::string SerializeScenarioConfig(const ScenarioConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  if (c.has_seed) j["seed"] = c.seed;
  j["mode"] = std::string(ToString(c.mode));
  j["horizon_s"] = c.horizon_s;
  const ConstellationConfig& k = c.constellation;
  j["constellation"] = {{"network_size", k.network_size},
                        {"geo_count", k.geo_count},
                        {"meo_count", k.meo_count},
                        {"meo_planes", k.meo_planes},
                        {"meo_altitude_km", k.meo_altitude_km},
                        {"meo_inclination_deg", k.meo_inclination_deg},
                        {"leo_altitude_km", k.leo_altitude_km},
                        {"leo_inclination_deg", k.leo_inclination_deg},
                        {"leo_planes", k.leo_planes},
                        {"leo_phasing_deg", k.leo_phasing_deg}};
  j["ground_stations"] = ordered_json::array();
  for (const GroundStationSpec& s : c.stations) {
    j["ground_stations"].push_back({{"name", s.name},
                                    {"latitude_deg", s.latitude_deg},
                                    {"longitude_deg", s.longitude_deg},
                                    {"min_elevation_deg", s.min_elevation_deg}});
  }
  j["targets"] = ordered_json::array();
  for (const SensingTarget& t : c.targets) {
    j["targets"].push_back({{"name", t.name},
                            {"latitude_deg", t.latitude_deg},
                            {"longitude_deg", t.longitude_deg}});
  }
  const CapacityConfig& cap = c.links.capacity;
  j["links"] = {
      {"step_s", c.links.step_s},
      {"laser_bps", cap.laser_bps},
      {"microwave_bps", cap.microwave_bps},
      {"ground_bps", cap.ground_bps},
      {"selection",
       cap.selection == CapacitySelection::kPerPairHash ? "per_pair_hash" : "fixed_index"},
      {"fixed_index", cap.fixed_index},
      {"antennas_per_station", cap.antennas_per_station},
      {"anchor_links_per_leo", cap.anchor_links_per_leo},
      {"anchor_link_class", std::string(ToString(cap.anchor_link_class))},
      {"leo_grid_isl", c.links.leo_grid_isl},
      {"anchor_mesh", c.links.anchor_mesh},
      {"sensing_min_elevation_deg", c.links.sensing_min_elevation_deg}};
  j["compute"] = {{"total_gbps", c.total_compute_gbps},
                  {"distribution", std::string(ToString(c.distribution))},
                  {"storage_gb", c.storage_gb}};
  const WorkloadParams& w = c.workload;
  j["workload"] = {{"task_count", w.count},
                   {"priority_mix", w.priority_mix},
                   {"arrival_start_s", w.arrival_start},
                   {"arrival_end_s", w.arrival_end},
                   {"regular_deadline_s", w.regular_deadline_s},
                   {"emergency_deadline_s", w.emergency_deadline_s},
                   {"quality_min", w.quality_min},
                   {"quality_max", w.quality_max}};
  j["fusion"] = {{"raw_gb", c.fusion.raw_gb},
                 {"preprocessed_gb", c.fusion.preprocessed_gb},
                 {"product_gb", c.fusion.product_gb},
                 {"sensing_duration_s", c.fusion.sensing_duration_s},
                 {"fusion_streams", c.fusion.fusion_streams},
                 {"processing_intensity", c.fusion.processing_intensity},
                 {"fusion_intensity", c.fusion.fusion_intensity}};
  const SchedulerConfig& s = c.scheduler;
  ordered_json eff = ordered_json::array();
  for (const auto& [key, mult] : s.efficiency) {
    eff.push_back({{"task_type", key.first},
                   {"regime", std::string(ToString(key.second))},
                   {"multiplier", mult}});
  }
  j["scheduler"] = {{"cycle_s", s.cycle_s},
                    {"headroom_fraction", s.headroom_fraction},
                    {"max_compute_rate_gbps", s.max_compute_rate_gbps},
                    {"awareness_link_reserve", s.awareness_link_reserve},
                    {"grid_s", s.grid_s},
                    {"expansion_budget", s.expansion_budget},
                    {"preemption_budget", s.preemption_budget},
                    {"efficiency", eff}};
  const AwarenessConfig& a = c.awareness;
  j["awareness"] = {
      {"policy",
       {{"rapid", PolicyJson(a.policy.by_class[0])},
        {"moderate", PolicyJson(a.policy.by_class[1])},
        {"stable", PolicyJson(a.policy.by_class[2])}}},
      {"volatility",
       {{"rapid_per_s", a.thresholds.rapid_per_s},
        {"moderate_per_s", a.thresholds.moderate_per_s}}},
      {"baseline_interval_s", a.baseline_interval_s},
      {"monitor_interval_s", a.monitor_interval_s},
      {"history_window_s", a.history_window_s},
      {"domain_refresh_s", a.domain_refresh_s},
      {"staleness_sample_s", a.staleness_sample_s},
      {"missed_reports_degraded", a.missed_reports_degraded},
      {"baseline_isl_relay", a.baseline_isl_relay}};
  const BackgroundConfig& b = c.background;
  j["background"] = {{"enabled", b.enabled},
                     {"levels", b.levels},
                     {"mean_hold_s", b.mean_hold_s},
                     {"random_walk", b.random_walk},
                     {"walk_step_fraction", b.walk_step_fraction},
                     {"walk_interval_s", b.walk_interval_s}};
  j["execution"] = {{"dispatch_check", c.execution.dispatch_check},
                    {"retry_unplaced", c.execution.retry_unplaced}};
  return j.dump(2) + "\n";
}

ScenarioConfig ParseScenarioConfig(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1;
    for (size_t i = 0; i < std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ValidationError(fmt::format("line {}: malformed JSON ({})", line, e.what()));
  }
  const Reader r(text);
  ScenarioConfig c = DefaultScenarioConfig();
  c.has_seed = false;
  c.seed = 0;
  r.CheckKeys(j, "",
              {"name", "seed", "mode", "horizon_s", "constellation", "ground_stations",
               "targets", "links", "compute", "workload", "fusion", "scheduler", "awareness",
               "background", "execution"});
  r.Get(j, "", "name", c.name);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      r.Fail("seed", "must be a non-negative integer");
    }
    if (j["seed"].is_number_integer() && j["seed"].get<int64_t>() < 0) {
      r.Fail("seed", "must be a non-negative integer");
    }
    c.seed = j["seed"].get<uint64_t>();
    c.has_seed = true;
  }
  r.Enum(j, "", "mode", [&](const std::string& s) { c.mode = ParseAwarenessMode(s); });
  r.Get(j, "", "horizon_s", c.horizon_s);

  if (j.contains("constellation")) {
    const auto& o = j["constellation"];
    const std::string p = "constellation";
    r.CheckKeys(o, p,
                {"network_size", "geo_count", "meo_count", "meo_planes", "meo_altitude_km",
                 "meo_inclination_deg", "leo_altitude_km", "leo_inclination_deg",
                 "leo_planes", "leo_phasing_deg"});
    ConstellationConfig& k = c.constellation;
    r.Get(o, p, "network_size", k.network_size);
    r.Get(o, p, "geo_count", k.geo_count);
    r.Get(o, p, "meo_count", k.meo_count);
    r.Get(o, p, "meo_planes", k.meo_planes);
    r.Get(o, p, "meo_altitude_km", k.meo_altitude_km);
    r.Get(o, p, "meo_inclination_deg", k.meo_inclination_deg);
    r.Get(o, p, "leo_altitude_km", k.leo_altitude_km);
    r.Get(o, p, "leo_inclination_deg", k.leo_inclination_deg);
    r.Get(o, p, "leo_planes", k.leo_planes);
    r.Get(o, p, "leo_phasing_deg", k.leo_phasing_deg);
    r.Check(p, [&] { k.Validate(); });
  }
  if (j.contains("ground_stations")) {
    const auto& arr = j["ground_stations"];
    if (!arr.is_array()) r.Fail("ground_stations", "must be an array");
    c.stations.clear();
    for (size_t i = 0; i < arr.size(); ++i) {
      const std::string p = fmt::format("ground_stations[{}]", i);
      r.CheckKeys(arr[i], p, {"name", "latitude_deg", "longitude_deg", "min_elevation_deg"});
      GroundStationSpec s;
      s.name = fmt::format("gs{}", i);
      r.Get(arr[i], p, "name", s.name);
      r.Get(arr[i], p, "latitude_deg", s.latitude_deg);
      r.Get(arr[i], p, "longitude_deg", s.longitude_deg);
      r.Get(arr[i], p, "min_elevation_deg", s.min_elevation_deg);
      r.Check(p, [&] { s.Validate(); });
      c.stations.push_back(s);
    }
  }
  if (j.contains("targets")) {
    const auto& arr = j["targets"];
    if (!arr.is_array()) r.Fail("targets", "must be an array");
    c.targets.clear();
    for (size_t i = 0; i < arr.size(); ++i) {
      const std::string p = fmt::format("targets[{}]", i);
      r.CheckKeys(arr[i], p, {"name", "latitude_deg", "longitude_deg"});
      SensingTarget t;
      t.name = fmt::format("target{}", i);
      r.Get(arr[i], p, "name", t.name);
      r.Get(arr[i], p, "latitude_deg", t.latitude_deg);
      r.Get(arr[i], p, "longitude_deg", t.longitude_deg);
      c.targets.push_back(t);
    }
  }
  if (j.contains("links")) {
    const auto& o = j["links"];
    const std::string p = "links";
    r.CheckKeys(o, p,
                {"step_s", "laser_bps", "microwave_bps", "ground_bps", "selection",
                 "fixed_index", "antennas_per_station", "anchor_links_per_leo",
                 "anchor_link_class", "leo_grid_isl", "anchor_mesh",
                 "sensing_min_elevation_deg"});
    CapacityConfig& cap = c.links.capacity;
    r.Get(o, p, "step_s", c.links.step_s);
    r.Get(o, p, "laser_bps", cap.laser_bps);
    r.Get(o, p, "microwave_bps", cap.microwave_bps);
    r.Get(o, p, "ground_bps", cap.ground_bps);
    r.Enum(o, p, "selection", [&](const std::string& s) {
      if (s == "per_pair_hash") {
        cap.selection = CapacitySelection::kPerPairHash;
      } else if (s == "fixed_index") {
        cap.selection = CapacitySelection::kFixedIndex;
      } else {
        throw ValidationError("expected per_pair_hash|fixed_index");
      }
    });
    r.Get(o, p, "fixed_index", cap.fixed_index);
    r.Get(o, p, "antennas_per_station", cap.antennas_per_station);
    r.Get(o, p, "anchor_links_per_leo", cap.anchor_links_per_leo);
    r.Enum(o, p, "anchor_link_class",
           [&](const std::string& s) { cap.anchor_link_class = ParseLinkClass(s); });
    r.Get(o, p, "leo_grid_isl", c.links.leo_grid_isl);
    r.Get(o, p, "anchor_mesh", c.links.anchor_mesh);
    r.Get(o, p, "sensing_min_elevation_deg", c.links.sensing_min_elevation_deg);
    r.Check(p, [&] { cap.Validate(); });
  }
  if (j.contains("compute")) {
    const auto& o = j["compute"];
    const std::string p = "compute";
    r.CheckKeys(o, p, {"total_gbps", "distribution", "storage_gb"});
    r.Get(o, p, "total_gbps", c.total_compute_gbps);
    r.Enum(o, p, "distribution",
           [&](const std::string& s) { c.distribution = ParseDistributionPolicy(s); });
    r.Get(o, p, "storage_gb", c.storage_gb);
  }
  if (j.contains("workload")) {
    const auto& o = j["workload"];
    const std::string p = "workload";
    r.CheckKeys(o, p,
                {"task_count", "priority_mix", "arrival_start_s", "arrival_end_s",
                 "regular_deadline_s", "emergency_deadline_s", "quality_min",
                 "quality_max"});
    WorkloadParams& w = c.workload;
    r.Get(o, p, "task_count", w.count);
    if (o.contains("priority_mix")) {
      if (!o["priority_mix"].is_array() || o["priority_mix"].size() != 4) {
        r.Fail("workload.priority_mix", "must be an array of 4 weights");
      }
      r.Get(o, p, "priority_mix", w.priority_mix);
    }
    r.Get(o, p, "arrival_start_s", w.arrival_start);
    r.Get(o, p, "arrival_end_s", w.arrival_end);
    r.Get(o, p, "regular_deadline_s", w.regular_deadline_s);
    r.Get(o, p, "emergency_deadline_s", w.emergency_deadline_s);
    r.Get(o, p, "quality_min", w.quality_min);
    r.Get(o, p, "quality_max", w.quality_max);
    r.Check(p, [&] { w.Validate(); });
  }
  if (j.contains("fusion")) {
    const auto& o = j["fusion"];
    const std::string p = "fusion";
    r.CheckKeys(o, p,
                {"raw_gb", "preprocessed_gb", "product_gb", "sensing_duration_s",
                 "fusion_streams", "processing_intensity", "fusion_intensity"});
    r.Get(o, p, "raw_gb", c.fusion.raw_gb);
    r.Get(o, p, "preprocessed_gb", c.fusion.preprocessed_gb);
    r.Get(o, p, "product_gb", c.fusion.product_gb);
    r.Get(o, p, "sensing_duration_s", c.fusion.sensing_duration_s);
    r.Get(o, p, "fusion_streams", c.fusion.fusion_streams);
    r.Get(o, p, "processing_intensity", c.fusion.processing_intensity);
    r.Get(o, p, "fusion_intensity", c.fusion.fusion_intensity);
    const FusionParams& f = c.fusion;
    if (!(f.raw_gb > 0 && f.preprocessed_gb > 0 && f.product_gb > 0 &&
          f.sensing_duration_s > 0 && f.fusion_streams >= 1 &&
          f.processing_intensity > 0 && f.fusion_intensity > 0)) {
      r.Fail(p, "volumes, durations and intensities must be > 0 and fusion_streams >= 1");
    }
  }
  if (j.contains("scheduler")) {
    const auto& o = j["scheduler"];
    const std::string p = "scheduler";
    r.CheckKeys(o, p,
                {"cycle_s", "headroom_fraction", "max_compute_rate_gbps",
                 "awareness_link_reserve", "grid_s", "expansion_budget",
                 "preemption_budget", "efficiency"});
    SchedulerConfig& s = c.scheduler;
    if (o.contains("cycle_s")) {
      if (!o["cycle_s"].is_array() || o["cycle_s"].size() != 3) {
        r.Fail("scheduler.cycle_s", "must list the cycles of priorities 1, 2 and 3");
      }
      r.Get(o, p, "cycle_s", s.cycle_s);
    }
    r.Get(o, p, "headroom_fraction", s.headroom_fraction);
    r.Get(o, p, "max_compute_rate_gbps", s.max_compute_rate_gbps);
    r.Get(o, p, "awareness_link_reserve", s.awareness_link_reserve);
    r.Get(o, p, "grid_s", s.grid_s);
    r.Get(o, p, "expansion_budget", s.expansion_budget);
    r.Get(o, p, "preemption_budget", s.preemption_budget);
    if (o.contains("efficiency")) {
      const auto& arr = o["efficiency"];
      if (!arr.is_array()) r.Fail("scheduler.efficiency", "must be an array");
      s.efficiency.clear();
      for (size_t i = 0; i < arr.size(); ++i) {
        const std::string q = fmt::format("scheduler.efficiency[{}]", i);
        r.CheckKeys(arr[i], q, {"task_type", "regime", "multiplier"});
        std::string type = "fusion";
        Regime regime = Regime::kLeo;
        double mult = 1.0;
        r.Get(arr[i], q, "task_type", type);
        r.Enum(arr[i], q, "regime", [&](const std::string& v) { regime = ParseRegime(v); });
        r.Get(arr[i], q, "multiplier", mult);
        s.efficiency[{type, regime}] = mult;
      }
    }
    r.Check(p, [&] { s.Validate(); });
  }
  if (j.contains("awareness")) {
    const auto& o = j["awareness"];
    const std::string p = "awareness";
    r.CheckKeys(o, p,
                {"policy", "volatility", "baseline_interval_s", "monitor_interval_s",
                 "history_window_s", "domain_refresh_s", "staleness_sample_s",
                 "missed_reports_degraded", "baseline_isl_relay"});
    AwarenessConfig& a = c.awareness;
    if (o.contains("policy")) {
      const auto& po = o["policy"];
      r.CheckKeys(po, "awareness.policy", {"rapid", "moderate", "stable"});
      const char* names[] = {"rapid", "moderate", "stable"};
      for (int k = 0; k < 3; ++k) {
        if (!po.contains(names[k])) continue;
        const std::string q = std::string("awareness.policy.") + names[k];
        const auto& cp = po[names[k]];
        r.CheckKeys(cp, q, {"mode", "interval_s", "event_threshold"});
        ClassPolicy& cls = a.policy.by_class[k];
        r.Enum(cp, q, "mode", [&](const std::string& v) {
          if (v == "periodic") {
            cls.mode = ReportMode::kPeriodic;
          } else if (v == "event_driven") {
            cls.mode = ReportMode::kEventDriven;
          } else if (v == "periodic_or_event") {
            cls.mode = ReportMode::kPeriodicOrEvent;
          } else {
            throw ValidationError("expected periodic|event_driven|periodic_or_event");
          }
        });
        r.Get(cp, q, "interval_s", cls.interval_s);
        r.Get(cp, q, "event_threshold", cls.event_threshold);
      }
      r.Check("awareness.policy", [&] { a.policy.Validate(); });
    }
    if (o.contains("volatility")) {
      const auto& vo = o["volatility"];
      r.CheckKeys(vo, "awareness.volatility", {"rapid_per_s", "moderate_per_s"});
      r.Get(vo, "awareness.volatility", "rapid_per_s", a.thresholds.rapid_per_s);
      r.Get(vo, "awareness.volatility", "moderate_per_s", a.thresholds.moderate_per_s);
    }
    r.Get(o, p, "baseline_interval_s", a.baseline_interval_s);
    r.Get(o, p, "monitor_interval_s", a.monitor_interval_s);
    r.Get(o, p, "history_window_s", a.history_window_s);
    r.Get(o, p, "domain_refresh_s", a.domain_refresh_s);
    r.Get(o, p, "staleness_sample_s", a.staleness_sample_s);
    r.Get(o, p, "missed_reports_degraded", a.missed_reports_degraded);
    r.Get(o, p, "baseline_isl_relay", a.baseline_isl_relay);
    r.Check(p, [&] { a.Validate(); });
  }
  if (j.contains("background")) {
    const auto& o = j["background"];
    const std::string p = "background";
    r.CheckKeys(o, p,
                {"enabled", "levels", "mean_hold_s", "random_walk", "walk_step_fraction",
                 "walk_interval_s"});
    BackgroundConfig& b = c.background;
    r.Get(o, p, "enabled", b.enabled);
    r.Get(o, p, "levels", b.levels);
    r.Get(o, p, "mean_hold_s", b.mean_hold_s);
    r.Get(o, p, "random_walk", b.random_walk);
    r.Get(o, p, "walk_step_fraction", b.walk_step_fraction);
    r.Get(o, p, "walk_interval_s", b.walk_interval_s);
    r.Check(p, [&] { b.Validate(); });
  }
  if (j.contains("execution")) {
    const auto& o = j["execution"];
    const std::string p = "execution";
    r.CheckKeys(o, p, {"dispatch_check", "retry_unplaced"});
    r.Get(o, p, "dispatch_check", c.execution.dispatch_check);
    r.Get(o, p, "retry_unplaced", c.execution.retry_unplaced);
  }
  if (!c.has_seed) throw ValidationError("missing required field 'seed'");
  try {
    c.Validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  return c;
}

std::string ContactPlanKey(const ScenarioConfig& c) {
  ordered_json j = ordered_json::parse(SerializeScenarioConfig(c));
  ordered_json key;
  key["horizon_s"] = j["horizon_s"];
  key["constellation"] = j["constellation"];
  key["ground_stations"] = j["ground_stations"];
  key["targets"] = j["targets"];
  key["links"] = j["links"];
  return key.dump();
}

}  // namespace cnsc
