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


// Discrete-event engine: ground truth, awareness traffic, planning cycles,
// emergency arrivals and stage execution for one scenario.

#ifndef CNSC_ENGINE_H_
#define CNSC_ENGINE_H_

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cnsc/awareness.h"
#include "cnsc/config.h"
#include "cnsc/metrics.h"
#include "cnsc/orbital.h"
#include "cnsc/scheduler.h"
#include "cnsc/task_model.h"
#include "cnsc/util.h"

namespace cnsc {

// Kinds in tie-break order for events at equal times.
enum class EventKind : uint8_t {
  kWindow,
  kReportDeliver,
  kStageComplete,
  kStageStart,
  kPlanTick,
  kTaskArrival,
  kDomainRefresh,
  kMonitor,
  kStalenessSample,
};

// Outcome of checking a stage's demand against ground truth. nullopt means
// the stage may start; otherwise the failure is stale_view_conflict when the
// view the plan used showed enough, and insufficient_resources when it did
// not (a planner defect).
std::optional<FailureReason> ClassifyExecution(double view_available,
                                               double truth_available, double demand);

// A transfer of `bits` from `from` to `to` starting at `start` at
// `fraction` of each window's capacity. The transfer runs while a window
// of the pair is open, pauses when it closes and resumes in the next one.
struct TransferSegment {
  int window = -1;
  double start = 0.0;
  double end = 0.0;
};
struct TransferRun {
  std::vector<TransferSegment> segments;
  double completion = 0.0;
  bool finished = false;  // false if the pair has no further windows
};
TransferRun RunTransfer(const ContactPlan& plan, NodeId from, NodeId to, double start,
                        double bits, double fraction);

struct TraceEvent {
  double t = 0.0;
  std::string event;
  TaskId task = -1;
  StageId stage = -1;
  NodeId node = kNoNode;
  std::string detail;
};

// t,event,task_id,stage_id,node_id,detail
void WriteTraceCsv(std::ostream& out, std::span<const TraceEvent> trace);

// Piecewise-constant non-orchestrated compute load per node, drawn lazily
// from the scenario seed. Queries for one node must not go back in time.
class BackgroundLoad {
 public:
  BackgroundLoad(const BackgroundConfig& config, uint64_t seed,
                 std::vector<double> capacities);
  double At(NodeId node, double t);

 private:
  struct NodeState {
    double level = 0.0;
    double next_change = 0.0;
    double walk = 0.0;
    double next_walk = 0.0;
    Rng rng{0};
    bool init = false;
  };
  BackgroundConfig config_;
  uint64_t seed_;
  std::vector<double> capacity_;
  std::vector<NodeState> nodes_;
};

struct AuditReport {
  // Stage starts refused although the plan's view already showed too
  // little; must stay 0.
  int insufficient_at_execution = 0;
  int causality_violations = 0;
  std::vector<std::string> conservation;  // per-resource mismatches
  std::vector<std::string> timeline;      // AuditTimelines at the horizon

  bool ok() const {
    return insufficient_at_execution == 0 && causality_violations == 0 &&
           conservation.empty() && timeline.empty();
  }
};

struct RunResult {
  std::vector<TraceEvent> trace;
  std::vector<TaskRecord> tasks;
  std::vector<AwarenessRecord> awareness;
  std::vector<StalenessSample> staleness;
  std::vector<ScheduleEntry> entries;  // every entry ever planned, final status
  std::vector<std::pair<TaskId, FailureReason>> unplaced;
  MetricsReport metrics;
  MetricsRow row;
  AuditReport audit;
  int64_t events = 0;
};

// Overrides for hand-built scenarios; empty members fall back to the
// config.
struct ScenarioInputs {
  std::shared_ptr<const ContactPlan> plan;
  std::optional<std::vector<TaskSpec>> tasks;
  // Entries committed at t = 0 without planning; their tasks skip the
  // planner unless a stage has to be re-planned.
  std::vector<ScheduleEntry> preplanned;
  // Keep the event trace and awareness log (sweeps turn this off).
  bool keep_logs = true;
};

std::shared_ptr<const ContactPlan> BuildContactPlan(const ScenarioConfig& config);
std::vector<CapabilityDescriptor> BuildNodes(const ScenarioConfig& config,
                                             const ContactPlan& plan);
std::vector<TaskSpec> BuildWorkload(const ScenarioConfig& config);

// Validates the config, then runs to the horizon.
RunResult RunScenario(const ScenarioConfig& config, const ScenarioInputs& inputs = {});

// Writes trace.csv, tasks.csv, awareness_log.csv, staleness.csv, plans.csv,
// registry.csv, contact_plan.csv, workload.csv, metrics.csv and summary.txt.
void WriteRunOutputs(const std::string& dir, const ScenarioConfig& config,
                     const RunResult& result, const ContactPlan& plan,
                     std::span<const TaskSpec> tasks);

}  // namespace cnsc

#endif  // CNSC_ENGINE_H_
