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


// Presets and parameter sweeps over scenario configs.

#ifndef CNSC_SWEEP_H_
#define CNSC_SWEEP_H_

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnsc/config.h"
#include "cnsc/engine.h"
#include "cnsc/metrics.h"

namespace cnsc {

struct SweepSpec {
  ScenarioConfig base;
  std::vector<int> network_sizes;
  std::vector<int> task_counts;
  std::vector<AwarenessMode> modes;
  std::vector<uint64_t> seeds;
  // Total compute is network_size times this; 0 keeps the base total.
  double compute_per_satellite_gbps = 0.0;

  void Validate() const;
  // Cells in axis order: size, tasks, mode, seed.
  std::vector<ScenarioConfig> Cells() const;
};

// Cell directory name, distinct for every cell of a sweep.
std::string CellName(const ScenarioConfig& cell);

// JSON with "base" (path of a scenario config, relative to `base_dir`),
// "network_sizes", "task_counts", "modes", "seeds" and optionally
// "compute_per_satellite_gbps". Throws ValidationError.
SweepSpec ParseSweepSpec(std::string_view text, const std::string& base_dir);

struct Preset {
  ScenarioConfig config;
  ScenarioInputs inputs;
  std::optional<SweepSpec> sweep;
};

// smoke, fig5-desk, fig6-desk, full-scale. Throws ValidationError for other
// names.
Preset GetPreset(const std::string& name);
std::vector<std::string> PresetNames();

struct CellFailure {
  std::string cell;
  std::string error;
};

struct SweepResult {
  std::vector<MetricsRow> rows;  // sorted
  std::vector<CellFailure> failures;
  std::vector<AuditReport> audits;  // per successful cell, in cell order
};

struct SweepOptions {
  int jobs = 1;
  // When set, each cell writes tasks.csv, staleness.csv, metrics.csv and
  // summary.txt under <cell_dir>/<CellName>.
  std::string cell_dir;
  std::function<void(const std::string& cell, const MetricsRow&)> on_cell;
};

// Runs every cell on up to `jobs` worker threads. Contact plans are built
// once per distinct ContactPlanKey and shared read-only. A failing cell is
// recorded and the sweep goes on.
SweepResult RunSweep(const SweepSpec& spec, const SweepOptions& options = {});

// Writes metrics.csv, summary.txt and failures.csv.
void WriteSweepOutputs(const std::string& dir, const SweepResult& result);

}  // namespace cnsc

#endif  // CNSC_SWEEP_H_
