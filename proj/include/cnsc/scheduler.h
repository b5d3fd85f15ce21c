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

// Stage placement on resource timelines: the greedy DAG placer, periodic and
// emergency planning, re-planning of terminated tasks, arbitration and
// auditing, plus an exhaustive planner for tiny instances.

#ifndef CNSC_SCHEDULER_H_
#define CNSC_SCHEDULER_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnsc/awareness.h"
#include "cnsc/orbital.h"
#include "cnsc/task_model.h"
#include "cnsc/types.h"

namespace cnsc {

enum class FailureReason : uint8_t {
  kNone,
  kInsufficientResources,
  kNoWindow,
  kDeadlineInfeasible,
  kPreempted,
  kStaleViewConflict,
};
inline constexpr int kNumFailureReasons = 6;
std::string_view ToString(FailureReason reason);
FailureReason ParseFailureReason(std::string_view text);

// Timeline keys: one per (node, resource) and one per contact window.
inline uint64_t NodeKey(NodeId node, Resource r) {
  return (static_cast<uint64_t>(node) << 2) | static_cast<uint64_t>(r);
}
inline uint64_t LinkKey(int window) {
  return (uint64_t{1} << 62) | static_cast<uint64_t>(window);
}
inline bool IsLinkKey(uint64_t key) { return (key >> 62) != 0; }
std::string KeyName(uint64_t key);

// [start, end) holding `amount`; `limit` is the planning bound the
// reservation was admitted against; seq is the commit order.
struct Reservation {
  double start = 0.0;
  double end = 0.0;
  double amount = 0.0;
  double limit = 0.0;
  TaskId task = 0;
  StageId stage = 0;
  int priority = 1;
  uint64_t seq = 0;
};

class ResourceTimeline {
 public:
  // Peak summed amount over [start, end), ignoring reservations of
  // `ignore_task`.
  double PeakUsage(uint64_t key, double start, double end,
                   TaskId ignore_task = -1) const;
  // nullopt if `amount` fits under `limit` over [start, end); otherwise the
  // earliest end (> start) of a reservation overlapping the interval, the
  // next instant worth retrying.
  std::optional<double> Conflict(uint64_t key, double start, double end,
                                 double amount, double limit) const;
  int CountOverlapping(uint64_t key, double start, double end) const;

  void Add(uint64_t key, Reservation r);
  // Removes the task's reservations that end after t; returns them with
  // their keys.
  std::vector<std::pair<uint64_t, Reservation>> RemoveTask(TaskId task,
                                                           double t = -1e300);
  // Removes one reservation of (task, stage) on `key`.
  void RemoveStage(uint64_t key, TaskId task, StageId stage);

  std::span<const Reservation> At(uint64_t key) const;
  std::vector<uint64_t> Keys() const;
  // Distinct tasks with a reservation ending after t.
  std::vector<TaskId> TasksActiveAfter(double t) const;
  int PriorityOf(TaskId task) const;
  uint64_t next_seq() const { return next_seq_; }
  size_t size() const;

 private:
  struct Lane {
    std::vector<Reservation> items;  // sorted by (start, seq)
    double max_len = 0.0;
  };
  std::unordered_map<uint64_t, Lane> lanes_;
  std::map<TaskId, std::vector<uint64_t>> task_keys_;
  std::map<TaskId, int> task_priority_;
  uint64_t next_seq_ = 0;
};

struct Usage {
  uint64_t key = 0;
  double amount = 0.0;
  double limit = 0.0;
};

enum class EntryStatus : uint8_t { kPlanned, kRunning, kCompleted, kFailed, kPreempted };
std::string_view ToString(EntryStatus s);

struct ScheduleEntry {
  TaskId task = 0;
  StageId stage = 0;
  StageKind kind = StageKind::kProcessing;
  int priority = 1;
  NodeId node = kNoNode;  // where the stage runs (transfer source)
  NodeId peer = kNoNode;  // transfer destination
  int window = -1;        // contact window of a transfer
  int access = -1;        // access window of a sensing stage
  double start = 0.0;
  double end = 0.0;
  double rate = 0.0;  // GB/s for compute stages, bit/s for transfers
  std::vector<Usage> usages;
  double view_ts = 0.0;  // view state timestamp of the node when planned
  EntryStatus status = EntryStatus::kPlanned;
  FailureReason fail_reason = FailureReason::kNone;

  NodeId OutputNode() const { return peer != kNoNode ? peer : node; }
};

struct StageProgress {
  bool done = false;
  NodeId output_node = kNoNode;
  double end = 0.0;
};
using TaskProgress = std::vector<StageProgress>;

// Planner-facing node facts (from the registry).
struct NodeInfo {
  bool schedulable = false;
  Regime regime = Regime::kLeo;
  double compute_bound = 0.0;
  double storage_bound = 0.0;
  bool sensor = false;
};

struct SchedulerConfig {
  // Planning cycle per regular priority 1..3.
  std::array<double, 3> cycle_s = {600.0, 180.0, 60.0};
  // Fraction of a node's compute bound kept free when planning.
  double headroom_fraction = 0.0;
  // Upper bound on a compute stage's rate; 0 = no bound.
  double max_compute_rate_gbps = 0.0;
  // Fraction of every link held back for awareness traffic.
  double awareness_link_reserve = 0.01;
  double grid_s = 1.0;
  // Search nodes per place_dag call before giving up.
  int expansion_budget = 4000;
  // Placement attempts spent on exhaustive victim search before the greedy
  // fallback.
  int preemption_budget = 512;
  // Compute efficiency per (task type, regime); missing = 1.
  std::map<std::pair<std::string, Regime>, double> efficiency;

  void Validate() const;
  double Efficiency(const std::string& type, Regime regime) const;
};

// Cycle for priority 1..3; priority 4 (emergency) throws ValidationError.
double PlanningCycle(int priority, const SchedulerConfig& config = {});

struct PlanningContext {
  const ContactPlan* plan = nullptr;
  std::span<const NodeInfo> nodes;
  const ResourceView* view = nullptr;  // null = plan against bounds
  const SchedulerConfig* config = nullptr;
  double t_now = 0.0;

  // Planning bounds taken from the view (capability bound if the node has
  // not reported yet).
  double ComputeLimit(NodeId n) const;
  double StorageLimit(NodeId n) const;
  double ViewTs(NodeId n) const;
};

// Stage durations on the 1 s grid.
double ComputeStageDuration(double compute_gb, double rate_gbps, double efficiency,
                            double grid_s);
double TransferStageDuration(double transfer_gb, double rate_bps, double prop_s,
                             double grid_s);

struct PlaceResult {
  bool ok = false;
  FailureReason reason = FailureReason::kNone;
  std::vector<ScheduleEntry> entries;
  int expansions = 0;
};

// Earliest-finish placement in topological order with backtracking over
// candidate nodes (sorted by finish, load, node id). Stages marked done in
// `progress` are skipped and their outputs sourced from the recorded node.
// Nothing is committed.
PlaceResult PlaceDag(const TaskSpec& task, const PlanningContext& ctx,
                     const ResourceTimeline& timelines,
                     const TaskProgress* progress = nullptr);

// Writes the entries' reservations into the timelines.
void Commit(std::span<const ScheduleEntry> entries, ResourceTimeline& timelines);

struct Plan {
  std::vector<ScheduleEntry> entries;
  std::vector<std::pair<TaskId, FailureReason>> unplaced;
  std::vector<TaskId> preempted;  // victims of an emergency placement
  std::vector<TaskId> completed;  // re-planned tasks with nothing left to do
};

// Orders tasks by (priority desc, deadline asc, arrival asc, id asc) and
// places them one by one, committing each success.
Plan PlanPeriodic(std::span<const TaskSpec* const> pending,
                  const PlanningContext& ctx, ResourceTimeline& timelines);

// Places an emergency task, preempting the smallest set of lower-priority
// tasks (ties: lower priorities, then lower ids) when blocked. Victims'
// reservations ending after t_now are removed and listed in `preempted`.
Plan PlanEmergency(const TaskSpec& task, const PlanningContext& ctx,
                   ResourceTimeline& timelines);

struct TerminatedTask {
  const TaskSpec* task = nullptr;
  TaskProgress progress;
};
Plan ReplanTerminated(std::span<const TerminatedTask> tasks,
                      const PlanningContext& ctx, ResourceTimeline& timelines);

struct Proposal {
  int priority = 1;
  double timestamp = 0.0;
  std::vector<ScheduleEntry> entries;
};
// Admits proposals in (priority desc, timestamp asc, index asc) order,
// rejecting whole proposals that conflict; returns admitted indices in
// admission order.
std::vector<size_t> Arbitrate(std::span<const Proposal> proposals,
                              ResourceTimeline& timelines);

// Capacity audit: for every reservation r, the summed amount of
// reservations committed no later than r never exceeds r.limit inside r.
std::vector<std::string> AuditTimelines(const ResourceTimeline& timelines);

// Precedence, window containment and deadline audit of placed entries.
std::vector<std::string> AuditEntries(std::span<const ScheduleEntry> entries,
                                      std::span<const TaskSpec> tasks,
                                      const ContactPlan& plan,
                                      const std::map<TaskId, TaskProgress>* progress =
                                          nullptr);

// Exhaustive optimum by weighted completion (sum of priorities of placed
// tasks) for tiny instances: <= 3 tasks, <= 3 schedulable nodes, <= 4
// contact windows. Throws ValidationError beyond those bounds.
struct BruteForceResult {
  int weight = 0;
  std::vector<TaskId> placed;
};
BruteForceResult BruteForcePlan(std::span<const TaskSpec> tasks,
                                const PlanningContext& ctx);

// task_id,stage_id,node_id,resource,amount,start_s,end_s,status,fail_reason
// One row per entry usage; unplaced tasks get a single row with empty
// stage fields.
void WritePlanCsv(std::ostream& out, std::span<const ScheduleEntry> entries,
                  std::span<const std::pair<TaskId, FailureReason>> unplaced);

}  // namespace cnsc

#endif  // CNSC_SCHEDULER_H_
