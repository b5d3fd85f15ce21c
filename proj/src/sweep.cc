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


#include "cnsc/sweep.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"

namespace cnsc {

namespace {

using nlohmann::ordered_json;

std::string ReadFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError(fmt::format("cannot read {}", path));
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// Two satellites, one station and one sensing task that the planner
// places end to end: sensing on 0, processing on 0, laser hop to 1, fusion
// on 1, downlink to the station.
Preset SmokePreset() {
  Preset p;
  ScenarioConfig& c = p.config;
  c = DefaultScenarioConfig();
  c.name = "smoke";
  c.seed = 1;
  c.horizon_s = 1200.0;
  c.constellation.network_size = 2;
  c.constellation.geo_count = 0;
  c.constellation.meo_count = 0;
  c.total_compute_gbps = 10.0;
  c.background.enabled = false;
  c.workload.count = 1;
  c.workload.arrival_start = 0.0;
  c.workload.arrival_end = 100.0;
  c.stations.resize(1);
  c.targets.resize(1);

  OrbitShellSpec shell;
  shell.regime = Regime::kLeo;
  shell.altitude_km = 550.0;
  shell.inclination_deg = 53.0;
  shell.plane_count = 1;
  shell.sats_per_plane = 2;
  std::vector<ContactWindow> windows = {
      {0, 1, 0.0, 1200.0, LinkClass::kLaserIsl, 10e9},
      {1, 2, 0.0, 1200.0, LinkClass::kGround, 10e9},
  };
  std::vector<AccessWindow> accesses = {{0, 0, 100.0, 400.0}};
  p.inputs.plan = std::make_shared<const ContactPlan>(
      GenerateConstellation(std::vector<OrbitShellSpec>{shell}), c.stations, c.targets, windows, accesses, c.horizon_s);

  TaskSpec t;
  t.task_id = 0;
  t.type = "fusion";
  t.priority = 3;
  t.arrival = 10.0;
  t.deadline = 1000.0;
  t.target = 0;
  StageSpec s;
  s.stage_id = 0;
  s.kind = StageKind::kSensing;
  s.sensing_duration_s = 30.0;
  s.output_gb = 1.0;
  t.stages.push_back(s);
  s = {};
  s.stage_id = 1;
  s.kind = StageKind::kProcessing;
  s.input_gb = 1.0;
  s.compute_gb = 5.0;
  s.output_gb = 1.0;
  t.stages.push_back(s);
  s = {};
  s.stage_id = 2;
  s.kind = StageKind::kTransmission;
  s.input_gb = 1.0;
  s.transfer_gb = 1.0;
  s.output_gb = 1.0;
  t.stages.push_back(s);
  s = {};
  s.stage_id = 3;
  s.kind = StageKind::kFusion;
  s.input_gb = 1.0;
  s.compute_gb = 5.0;
  s.output_gb = 0.5;
  t.stages.push_back(s);
  s = {};
  s.stage_id = 4;
  s.kind = StageKind::kDistribution;
  s.input_gb = 0.5;
  s.transfer_gb = 0.5;
  s.output_gb = 0.5;
  t.stages.push_back(s);
  t.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  p.inputs.tasks = std::vector<TaskSpec>{t};
  return p;
}

Preset DeskPreset(const std::string& name) {
  Preset p;
  p.config = DefaultScenarioConfig();
  p.config.name = name;
  SweepSpec s;
  s.base = p.config;
  s.network_sizes = {60, 150, 300, 600};
  s.task_counts = {50, 100, 200, 400};
  s.modes = {AwarenessMode::kYuheng, AwarenessMode::kBaseline};
  s.seeds = {1, 2, 3, 4, 5};
  s.compute_per_satellite_gbps = 300.0 / 600.0;
  p.sweep = s;
  return p;
}

Preset FullScalePreset() {
  Preset p;
  p.config = DefaultScenarioConfig();
  p.config.name = "full-scale";
  SweepSpec s;
  s.base = p.config;
  s.network_sizes = {6000};
  s.task_counts = {4000};
  s.modes = {AwarenessMode::kYuheng, AwarenessMode::kBaseline};
  s.seeds = {1};
  s.compute_per_satellite_gbps = 300.0 / 600.0;
  p.sweep = s;
  return p;
}

template <typename T>
std::vector<T> Axis(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(fmt::format("sweep: missing required field '{}'", key));
  if (!it->is_array() || it->empty()) {
    throw ValidationError(fmt::format("sweep: field '{}' must be a non-empty array", key));
  }
  std::vector<T> out;
  for (const auto& v : *it) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(fmt::format("sweep: '{}' holds strings", key));
    } else {
      if (!v.is_number_integer() || v.get<int64_t>() < 0) {
        throw ValidationError(
            fmt::format("sweep: '{}' holds non-negative integers", key));
      }
    }
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace

void SweepSpec::Validate() const {
  if (network_sizes.empty() || task_counts.empty() || modes.empty() || seeds.empty()) {
    throw ValidationError("sweep axes must be non-empty");
  }
  if (compute_per_satellite_gbps < 0.0) {
    throw ValidationError("sweep compute_per_satellite_gbps must be >= 0");
  }
  std::set<std::string> names;
  for (const ScenarioConfig& c : Cells()) {
    c.Validate();
    if (!names.insert(CellName(c)).second) {
      throw ValidationError(fmt::format("sweep cell {} appears twice", CellName(c)));
    }
  }
}

std::vector<ScenarioConfig> SweepSpec::Cells() const {
  std::vector<ScenarioConfig> cells;
  for (int size : network_sizes) {
    for (int tasks : task_counts) {
      for (AwarenessMode mode : modes) {
        for (uint64_t seed : seeds) {
          ScenarioConfig c = base;
          c.constellation.network_size = size;
          c.workload.count = tasks;
          c.mode = mode;
          c.seed = seed;
          c.has_seed = true;
          if (compute_per_satellite_gbps > 0.0) {
            c.total_compute_gbps = compute_per_satellite_gbps * size;
          }
          c.name = CellName(c);
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

std::string CellName(const ScenarioConfig& c) {
  return fmt::format("{}_n{}_t{}_s{}", ToString(c.mode), c.constellation.network_size,
                     c.workload.count, c.seed);
}

SweepSpec ParseSweepSpec(std::string_view text, const std::string& base_dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("sweep: malformed JSON ({})", e.what()));
  }
  if (!j.is_object()) throw ValidationError("sweep: top level must be an object");
  static const std::set<std::string> known = {"base", "network_sizes", "task_counts", "modes",
                                              "seeds", "compute_per_satellite_gbps"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ValidationError(fmt::format("sweep: unknown field '{}'", k));
  }
  SweepSpec s;
  if (!j.contains("base") || !j["base"].is_string()) {
    throw ValidationError("sweep: field 'base' must name a scenario config file");
  }
  const std::filesystem::path base =
      std::filesystem::path(base_dir) / j["base"].get<std::string>();
  try {
    s.base = ParseScenarioConfig(ReadFile(base.string()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", base.string(), e.what()));
  }
  s.network_sizes = Axis<int>(j, "network_sizes");
  s.task_counts = Axis<int>(j, "task_counts");
  for (const std::string& m : Axis<std::string>(j, "modes")) {
    s.modes.push_back(ParseAwarenessMode(m));
  }
  s.seeds = Axis<uint64_t>(j, "seeds");
  if (j.contains("compute_per_satellite_gbps")) {
    if (!j["compute_per_satellite_gbps"].is_number()) {
      throw ValidationError("sweep: 'compute_per_satellite_gbps' must be a number");
    }
    s.compute_per_satellite_gbps = j["compute_per_satellite_gbps"].get<double>();
  }
  s.Validate();
  return s;
}

Preset GetPreset(const std::string& name) {
  if (name == "smoke") return SmokePreset();
  if (name == "fig5-desk" || name == "fig6-desk") return DeskPreset(name);
  if (name == "full-scale") return FullScalePreset();
  throw ValidationError(fmt::format("unknown preset '{}'", name));
}

std::vector<std::string> PresetNames() {
  return {"smoke", "fig5-desk", "fig6-desk", "full-scale"};
}

SweepResult RunSweep(const SweepSpec& spec, const SweepOptions& options) {
  spec.Validate();
  const std::vector<ScenarioConfig> cells = spec.Cells();
  const int jobs = std::max(1, options.jobs);

  // Distinct plans first, then cells; both phases share one work scheme.
  std::map<std::string, std::shared_ptr<const ContactPlan>> plans;
  std::vector<std::string> keys;
  std::vector<const ScenarioConfig*> key_cfg;
  std::vector<std::string> cell_key(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) {
    cell_key[i] = ContactPlanKey(cells[i]);
    if (plans.emplace(cell_key[i], nullptr).second) {
      keys.push_back(cell_key[i]);
      key_cfg.push_back(&cells[i]);
    }
  }
  const auto parallel = [jobs](size_t n, const std::function<void(size_t)>& fn) {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const size_t count = std::min<size_t>(static_cast<size_t>(jobs), n);
    for (size_t w = 0; w < count; ++w) {
      workers.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) fn(i);
      });
    }
    for (std::thread& t : workers) t.join();
  };

  std::vector<std::shared_ptr<const ContactPlan>> built(keys.size());
  std::vector<std::string> plan_error(keys.size());
  parallel(keys.size(), [&](size_t k) {
    try {
      built[k] = BuildContactPlan(*key_cfg[k]);
    } catch (const std::exception& e) {
      plan_error[k] = e.what();
    }
  });
  std::map<std::string, std::string> key_error;
  for (size_t k = 0; k < keys.size(); ++k) {
    plans[keys[k]] = built[k];
    if (!plan_error[k].empty()) key_error[keys[k]] = plan_error[k];
  }

  std::vector<std::optional<MetricsRow>> rows(cells.size());
  std::vector<std::optional<AuditReport>> audits(cells.size());
  std::vector<std::string> errors(cells.size());
  std::mutex callback_mu;
  parallel(cells.size(), [&](size_t i) {
    const ScenarioConfig& cell = cells[i];
    try {
      if (key_error.count(cell_key[i])) throw std::runtime_error(key_error[cell_key[i]]);
      ScenarioInputs in;
      in.plan = plans.at(cell_key[i]);
      in.keep_logs = false;
      RunResult r = RunScenario(cell, in);
      if (!options.cell_dir.empty()) {
        const std::filesystem::path dir = std::filesystem::path(options.cell_dir) / cell.name;
        std::filesystem::create_directories(dir);
        std::ofstream tasks(dir / "tasks.csv");
        WriteTaskRecordsCsv(tasks, r.tasks);
        std::ofstream st(dir / "staleness.csv");
        WriteStalenessCsv(st, r.staleness);
        const std::vector<MetricsRow> one = {r.row};
        std::ofstream m(dir / "metrics.csv");
        WriteMetricsCsv(m, one);
        std::ofstream sum(dir / "summary.txt");
        WriteSummary(sum, one);
        if (!tasks || !st || !m || !sum) {
          throw std::runtime_error(fmt::format("cannot write outputs under {}", dir.string()));
        }
      }
      rows[i] = r.row;
      audits[i] = r.audit;
      if (options.on_cell) {
        std::lock_guard<std::mutex> lock(callback_mu);
        options.on_cell(cell.name, r.row);
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  SweepResult out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (rows[i]) {
      out.rows.push_back(*rows[i]);
      out.audits.push_back(*audits[i]);
    } else {
      out.failures.push_back({cells[i].name, errors[i]});
    }
  }
  SortMetricsRows(out.rows);
  return out;
}

void WriteSweepOutputs(const std::string& dir, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  std::ofstream m(d / "metrics.csv");
  WriteMetricsCsv(m, result.rows);
  std::ofstream s(d / "summary.txt");
  WriteSummary(s, result.rows);
  if (!result.failures.empty()) {
    s << "\nfailed cells: " << result.failures.size() << "\n";
  }
  std::ofstream f(d / "failures.csv");
  f << "cell,error\n";
  for (const CellFailure& c : result.failures) {
    std::string err = c.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    f << c.cell << "," << err << "\n";
  }
  if (!m || !s || !f) throw std::runtime_error(fmt::format("cannot write outputs under {}", dir));
}

}  // namespace cnsc
