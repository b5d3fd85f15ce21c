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

// Scenario configuration: one JSON document with every tunable visible.

#ifndef CNSC_CONFIG_H_
#define CNSC_CONFIG_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cnsc/awareness.h"
#include "cnsc/cluster.h"
#include "cnsc/orbital.h"
#include "cnsc/scheduler.h"
#include "cnsc/task_model.h"
#include "cnsc/types.h"

namespace cnsc {

// Constellation sized by a single network_size: fixed GEO and MEO counts,
// LEO takes the rest in a Walker shell with an automatic plane count unless
// leo_planes is set.
struct ConstellationConfig {
  int network_size = 600;
  int geo_count = 3;
  int meo_count = 12;
  int meo_planes = 3;
  double meo_altitude_km = 10000.0;
  double meo_inclination_deg = 45.0;
  double leo_altitude_km = 550.0;
  double leo_inclination_deg = 53.0;
  int leo_planes = 0;  // 0 = divisor of the LEO count nearest sqrt(leo / 1.5)
  double leo_phasing_deg = 0.5;

  void Validate() const;
  // Shells in id order: LEO, MEO, GEO.
  std::vector<OrbitShellSpec> Shells() const;
};

struct BackgroundConfig {
  bool enabled = true;
  // Levels of non-orchestrated compute load, as fractions of the node's
  // bound; each node holds a level for an exponential time then redraws.
  std::vector<double> levels = {0.0, 0.25, 0.5, 0.75};
  double mean_hold_s = 1800.0;
  // Optional extra random walk on top (off by default).
  bool random_walk = false;
  double walk_step_fraction = 0.02;
  double walk_interval_s = 10.0;

  void Validate() const;
};

struct AwarenessConfig {
  ReportingPolicy policy;
  VolatilityThresholds thresholds;
  double baseline_interval_s = 10.0;
  double monitor_interval_s = 10.0;   // node-side sampling tick
  double history_window_s = 300.0;    // samples used for classification
  double domain_refresh_s = 600.0;
  double staleness_sample_s = 10.0;
  int missed_reports_degraded = 3;
  bool baseline_isl_relay = false;

  void Validate() const;
};

struct ExecutionConfig {
  // Re-check each stage against the operations centre's current view before
  // dispatch; a failed check re-plans the task instead of dispatching it.
  bool dispatch_check = true;
  // Retry tasks that failed planning for lack of resources at later cycles.
  bool retry_unplaced = true;
};

struct ScenarioConfig {
  std::string name = "scenario";
  uint64_t seed = 0;
  bool has_seed = false;
  AwarenessMode mode = AwarenessMode::kYuheng;
  double horizon_s = 6 * 3600.0;

  ConstellationConfig constellation;
  std::vector<GroundStationSpec> stations;
  std::vector<SensingTarget> targets;
  ContactPlanOptions links;  // horizon_s is overridden by horizon_s above

  double total_compute_gbps = 300.0;
  DistributionPolicy distribution = DistributionPolicy::kUniform;
  double storage_gb = 64.0;

  WorkloadParams workload;
  FusionParams fusion;
  SchedulerConfig scheduler;
  AwarenessConfig awareness;
  BackgroundConfig background;
  ExecutionConfig execution;

  // Throws ValidationError naming the offending field.
  void Validate() const;
  ContactPlanOptions PlanOptions() const;
};

// Defaults used by print-default-config: six stations, four targets near
// them, 600 satellites, 300 GB/s, 400 tasks, seed 1.
ScenarioConfig DefaultScenarioConfig();

// Parses JSON text. Syntax errors and invalid fields throw ValidationError
// with "line N" where the position is known; a missing seed names the
// field.
ScenarioConfig ParseScenarioConfig(std::string_view text);
std::string SerializeScenarioConfig(const ScenarioConfig& config);

// Key identifying everything the contact plan depends on.
std::string ContactPlanKey(const ScenarioConfig& config);

}  // namespace cnsc

#endif  // CNSC_CONFIG_H_
