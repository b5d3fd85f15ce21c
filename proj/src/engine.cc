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


#include "cnsc/engine.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <unordered_map>

#include <fmt/format.h>

#include "cnsc/cluster.h"

namespace cnsc {

namespace {
constexpr double kEps = 1e-9;
}  // namespace

std::optional<FailureReason> ClassifyExecution(double view_available,
                                               double truth_available, double demand) {
  if (truth_available + kEps >= demand) return std::nullopt;
  if (view_available + kEps >= demand) return FailureReason::kStaleViewConflict;
  return FailureReason::kInsufficientResources;
}

TransferRun RunTransfer(const ContactPlan& plan, NodeId from, NodeId to, double start,
                        double bits, double fraction) {
  TransferRun run;
  double t = start;
  double left = bits;
  std::optional<int> w = plan.NextWindow(from, to, t);
  while (w) {
    const ContactWindow& win = plan.windows()[*w];
    const double s = std::max(t, win.start);
    const double rate = win.capacity_bps * fraction;
    if (rate <= 0.0) break;
    const double need = left / rate;
    if (s + need <= win.end + kEps) {
      run.segments.push_back({*w, s, s + need});
      run.completion = s + need + plan.PropagationDelayS(win, s);
      run.finished = true;
      return run;
    }
    run.segments.push_back({*w, s, win.end});
    left -= rate * (win.end - s);
    t = win.end;
    w = plan.NextWindow(from, to, t);
  }
  run.completion = t;
  return run;
}

void WriteTraceCsv(std::ostream& out, std::span<const TraceEvent> trace) {
  out << "t,event,task_id,stage_id,node_id,detail\n";
  for (const TraceEvent& e : trace) {
    out << FormatDouble(e.t) << ',' << e.event << ',';
    if (e.task >= 0) out << e.task;
    out << ',';
    if (e.stage >= 0) out << e.stage;
    out << ',';
    if (e.node != kNoNode) out << e.node;
    out << ',' << e.detail << '\n';
  }
}

BackgroundLoad::BackgroundLoad(const BackgroundConfig& config, uint64_t seed,
                               std::vector<double> capacities)
    : config_(config), seed_(seed), capacity_(std::move(capacities)),
      nodes_(capacity_.size()) {}

double BackgroundLoad::At(NodeId node, double t) {
  if (!config_.enabled || node < 0 || node >= static_cast<NodeId>(nodes_.size())) {
    return 0.0;
  }
  NodeState& s = nodes_[node];
  const double cap = capacity_[node];
  const auto draw_level = [&] {
    return config_.levels[s.rng.Below(config_.levels.size())] * cap;
  };
  if (!s.init) {
    s.init = true;
    s.rng = Rng(HashMix(seed_, static_cast<uint64_t>(node), 0xb6c0));
    s.level = draw_level();
    s.next_change = s.rng.Exponential(config_.mean_hold_s);
    s.next_walk = config_.walk_interval_s;
  }
  while (s.next_change <= t) {
    s.level = draw_level();
    s.next_change += s.rng.Exponential(config_.mean_hold_s);
  }
  if (config_.random_walk) {
    while (s.next_walk <= t) {
      s.walk += (s.rng.Uniform() < 0.5 ? -1.0 : 1.0) * config_.walk_step_fraction * cap;
      s.next_walk += config_.walk_interval_s;
    }
  }
  return std::clamp(s.level + s.walk, 0.0, cap);
}

std::shared_ptr<const ContactPlan> BuildContactPlan(const ScenarioConfig& config) {
  const std::vector<OrbitShellSpec> shells = config.constellation.Shells();
  return std::make_shared<const ContactPlan>(ComputeContactPlan(
      GenerateConstellation(shells), config.stations, config.targets, config.PlanOptions()));
}

std::vector<CapabilityDescriptor> BuildNodes(const ScenarioConfig& config,
                                             const ContactPlan& plan) {
  const size_t n = plan.satellites().size();
  const std::vector<double> compute =
      DistributeCapacity(config.total_compute_gbps, n, config.distribution);
  std::vector<CapabilityDescriptor> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    CapabilityDescriptor d;
    d.node_id = static_cast<NodeId>(i);
    d.regime = plan.satellites()[i].regime;
    d.compute_gbps = compute[i];
    d.storage_gb = config.storage_gb;
    d.link_classes = {LinkClass::kMicrowaveIsl, LinkClass::kLaserIsl, LinkClass::kGround};
    if (d.regime == Regime::kLeo) d.sensor_types = {"optical"};
    out.push_back(d);
  }
  return out;
}

std::vector<TaskSpec> BuildWorkload(const ScenarioConfig& config) {
  KnowledgeBase kb = KnowledgeBase::Default();
  kb.Put("fusion", FusionEntry(config.fusion));
  WorkloadParams p = config.workload;
  p.target_count = static_cast<int>(config.targets.size());
  p.seed = HashMix(config.seed, 0x3017);
  return GenerateWorkload(p, kb);
}

namespace {

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::kTaskArrival;
  int sub = 0;
  uint64_t seq = 0;
  int a = 0;
  int b = 0;
  int64_t c = 0;
};

struct Later {
  bool operator()(const Event& x, const Event& y) const {
    if (x.t != y.t) return x.t > y.t;
    if (x.kind != y.kind) return x.kind > y.kind;
    if (x.sub != y.sub) return x.sub > y.sub;
    return x.seq > y.seq;
  }
};

enum class TaskState : uint8_t { kFuture, kPending, kPlanned, kCompleted, kFailed };

struct StageRun {
  int entry = -1;    // index into the engine's entry list
  int version = 0;   // bumped whenever the stage's entry is replaced
  bool running = false;
  bool done = false;
  NodeId output = kNoNode;
  double end = 0.0;
  std::vector<double> view_free;  // per usage, as planned
  std::vector<Usage> held;  // what the running stage actually consumed
  TransferRun transfer;
  size_t segment = 0;
};

struct TaskRun {
  const TaskSpec* spec = nullptr;
  TaskState state = TaskState::kFuture;
  FailureReason last_reason = FailureReason::kNone;
  bool replan_after_transfer = false;
  std::vector<StageRun> stages;
  double finish = 0.0;
};

struct PendingReport {
  uint64_t id = 0;
  double t_deliver = 0.0;
  ResourceReport report;
};

struct History {
  std::deque<double> times;
  std::array<std::deque<double>, kNumResources> values;
};

class Engine {
 public:
  Engine(const ScenarioConfig& config, std::shared_ptr<const ContactPlan> plan,
         std::vector<TaskSpec> tasks, const ScenarioInputs& inputs);
  RunResult Run();

 private:
  const ScenarioConfig& cfg_;
  std::shared_ptr<const ContactPlan> plan_;
  std::vector<TaskSpec> specs_;
  const ScenarioInputs& inputs_;
  bool logs_;

  std::vector<CapabilityDescriptor> sats_;
  std::vector<NodeId> sat_ids_;
  Registry registry_;
  GroundTruthState truth_;
  BackgroundLoad bg_;
  std::vector<NodeInfo> info_;
  ResourceView view_;
  ResourceTimeline timeline_;

  std::vector<NodeId> anchors_;
  std::unordered_map<NodeId, NodeId> anchor_of_;
  std::vector<ReportClock> clocks_;
  std::vector<History> history_;
  std::vector<double> next_baseline_;
  std::vector<double> last_receipt_;
  std::vector<bool> degraded_;
  std::vector<std::deque<PendingReport>> pending_;
  uint64_t next_report_id_ = 0;
  LinkByteLedger ledger_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  uint64_t seq_ = 0;
  double now_ = 0.0;

  std::vector<TaskRun> tasks_;
  std::unordered_map<TaskId, int> index_;
  std::vector<ScheduleEntry> entries_;
  std::map<uint64_t, double> consumed_;
  std::map<uint64_t, double> released_;
  RunResult out_;

  void Push(double t, EventKind kind, int a = 0, int b = 0, int64_t c = 0, int sub = 0) {
    queue_.push(Event{t, kind, sub, seq_++, a, b, c});
  }
  void Trace(const char* event, TaskId task = -1, StageId stage = -1, NodeId node = kNoNode,
             std::string detail = "") {
    if (logs_) out_.trace.push_back({now_, event, task, stage, node, std::move(detail)});
  }
  PlanningContext Context() const {
    PlanningContext ctx;
    ctx.plan = plan_.get();
    ctx.nodes = info_;
    ctx.view = &view_;
    ctx.config = &cfg_.scheduler;
    ctx.t_now = now_;
    return ctx;
  }

  double TruthFree(const Usage& u, const ScheduleEntry& e);
  void Consume(const Usage& u, const ScheduleEntry& e);
  void Release(const Usage& u, const ScheduleEntry& e);

  void Install(const std::vector<ScheduleEntry>& entries);
  void Withdraw(TaskRun& task, EntryStatus status, FailureReason reason, bool remove);
  void AbortRunning(TaskRun& task, EntryStatus status, FailureReason reason);
  void FailTask(TaskRun& task, FailureReason reason, const char* why);
  void CompleteTask(TaskRun& task);
  TaskProgress Progress(const TaskRun& task) const;
  void Replan(std::span<TaskRun* const> tasks, FailureReason fallback, const char* why);
  void HandleUnplaced(TaskRun& task, FailureReason reason, bool retry);

  void OnArrival(const Event& e);
  void OnPlanTick(const Event& e);
  void OnStageStart(const Event& e);
  void OnStageComplete(const Event& e);
  void OnWindow(const Event& e);
  void OnMonitor(const Event& e);
  void OnReportDeliver(const Event& e);
  void OnStalenessSample(const Event& e);
  void OnDomainRefresh(const Event& e);
  void PlanEmergencyTask(TaskRun& task);
  void Send(NodeId node, ResourceReport report);
  void Setup();

  void Finish();
};

}  // namespace

namespace {

std::vector<double> Capacities(const std::vector<CapabilityDescriptor>& sats) {
  std::vector<double> c;
  c.reserve(sats.size());
  for (const CapabilityDescriptor& d : sats) c.push_back(d.compute_gbps);
  return c;
}

bool IsLinkKey(uint64_t key) { return (key >> 62) != 0; }
int WindowOfKey(uint64_t key) { return static_cast<int>(key & ((uint64_t{1} << 62) - 1)); }
NodeId NodeOfKey(uint64_t key) { return static_cast<NodeId>(key >> 2); }
Resource ResourceOfKey(uint64_t key) { return static_cast<Resource>(key & 3); }

Engine::Engine(const ScenarioConfig& config, std::shared_ptr<const ContactPlan> plan,
               std::vector<TaskSpec> tasks, const ScenarioInputs& inputs)
    : cfg_(config),
      plan_(std::move(plan)),
      specs_(std::move(tasks)),
      inputs_(inputs),
      logs_(inputs.keep_logs),
      sats_(BuildNodes(config, *plan_)),
      bg_(config.background, config.seed, Capacities(sats_)) {}

double Engine::TruthFree(const Usage& u, const ScheduleEntry&) {
  if (IsLinkKey(u.key)) return truth_.LinkResidual(WindowOfKey(u.key), 1.0);
  const NodeId n = NodeOfKey(u.key);
  const Resource r = ResourceOfKey(u.key);
  double v = truth_.Available(n, r);
  if (r == Resource::kCompute) v -= bg_.At(n, now_);
  return v;
}

void Engine::Consume(const Usage& u, const ScheduleEntry&) {
  if (IsLinkKey(u.key)) {
    truth_.ApplyLinkDelta(WindowOfKey(u.key), 1.0, -u.amount, now_);
  } else {
    truth_.Consume(NodeOfKey(u.key), ResourceOfKey(u.key), u.amount, now_);
  }
  consumed_[u.key] += u.amount;
}

void Engine::Release(const Usage& u, const ScheduleEntry&) {
  if (IsLinkKey(u.key)) {
    truth_.ApplyLinkDelta(WindowOfKey(u.key), 1.0, u.amount, now_);
  } else {
    truth_.Release(NodeOfKey(u.key), ResourceOfKey(u.key), u.amount, now_);
  }
  released_[u.key] += u.amount;
}

}  // namespace

namespace {

void Engine::Install(const std::vector<ScheduleEntry>& entries) {
  for (const ScheduleEntry& e : entries) {
    const int ti = index_.at(e.task);
    TaskRun& t = tasks_[ti];
    StageRun& s = t.stages[e.stage];
    ++s.version;
    s.entry = static_cast<int>(entries_.size());
    s.view_free.clear();
    for (const Usage& u : e.usages) {
      const double others = timeline_.PeakUsage(u.key, e.start, e.end) - u.amount;
      s.view_free.push_back(u.limit - std::max(0.0, others));
    }
    entries_.push_back(e);
    t.state = TaskState::kPlanned;
    Push(e.start, EventKind::kStageStart, ti, e.stage, s.version);
  }
}

void Engine::Withdraw(TaskRun& task, EntryStatus status, FailureReason reason, bool remove) {
  for (StageRun& s : task.stages) {
    if (s.done || s.running || s.entry < 0) continue;
    ScheduleEntry& e = entries_[s.entry];
    if (remove) {
      for (const Usage& u : e.usages) timeline_.RemoveStage(u.key, e.task, e.stage);
    }
    e.status = status;
    e.fail_reason = reason;
    s.entry = -1;
    ++s.version;
  }
}

void Engine::AbortRunning(TaskRun& task, EntryStatus status, FailureReason reason) {
  for (StageRun& s : task.stages) {
    if (!s.running) continue;
    ScheduleEntry& e = entries_[s.entry];
    for (const Usage& u : s.held) Release(u, e);
    s.held.clear();
    truth_.RemoveExecuting(e.node, e.task, e.stage);
    e.status = status;
    e.fail_reason = reason;
    s.running = false;
    s.entry = -1;
    ++s.version;
    Trace("stage_aborted", e.task, e.stage, e.node, std::string(ToString(reason)));
  }
}

void Engine::FailTask(TaskRun& task, FailureReason reason, const char* why) {
  timeline_.RemoveTask(task.spec->task_id, now_);
  Withdraw(task, EntryStatus::kFailed, reason, false);
  AbortRunning(task, EntryStatus::kFailed, reason);
  task.state = TaskState::kFailed;
  task.last_reason = reason;
  task.finish = now_;
  Trace("task_failed", task.spec->task_id, -1, kNoNode,
        fmt::format("{};{}", ToString(reason), why));
}

void Engine::CompleteTask(TaskRun& task) {
  task.state = TaskState::kCompleted;
  task.finish = now_;
  Trace("task_completed", task.spec->task_id);
}

TaskProgress Engine::Progress(const TaskRun& task) const {
  TaskProgress p(task.stages.size());
  for (size_t k = 0; k < task.stages.size(); ++k) {
    const StageRun& s = task.stages[k];
    if (s.done) {
      p[k] = {true, s.output, s.end};
    } else if (s.running) {
      // A running stage finishes at its planned end unless preempted.
      const ScheduleEntry& e = entries_[s.entry];
      p[k] = {true, e.OutputNode(), std::max(e.end, s.transfer.completion)};
    }
  }
  return p;
}

void Engine::Replan(std::span<TaskRun* const> tasks, FailureReason fallback,
                    const char* why) {
  if (tasks.empty()) return;
  std::vector<TerminatedTask> terminated;
  for (TaskRun* t : tasks) terminated.push_back({t->spec, Progress(*t)});
  const Plan plan = ReplanTerminated(terminated, Context(), timeline_);
  Install(plan.entries);
  for (TaskRun* t : tasks) {
    if (std::any_of(plan.entries.begin(), plan.entries.end(),
                    [&](const ScheduleEntry& e) { return e.task == t->spec->task_id; })) {
      Trace("replanned", t->spec->task_id, -1, kNoNode, why);
    }
  }
  for (TaskId id : plan.completed) CompleteTask(tasks_[index_.at(id)]);
  for (const auto& [id, reason] : plan.unplaced) {
    FailTask(tasks_[index_.at(id)], fallback != FailureReason::kNone ? fallback : reason, why);
  }
}

void Engine::HandleUnplaced(TaskRun& task, FailureReason reason, bool retry) {
  task.last_reason = reason;
  if (retry && cfg_.execution.retry_unplaced &&
      reason == FailureReason::kInsufficientResources && now_ < task.spec->deadline) {
    task.state = TaskState::kPending;
    Trace("plan_deferred", task.spec->task_id, -1, kNoNode, std::string(ToString(reason)));
    return;
  }
  FailTask(task, reason, "unplaced");
}

void Engine::PlanEmergencyTask(TaskRun& task) {
  const Plan plan = PlanEmergency(*task.spec, Context(), timeline_);
  if (plan.entries.empty()) {
    const FailureReason reason =
        plan.unplaced.empty() ? FailureReason::kNoWindow : plan.unplaced.front().second;
    HandleUnplaced(task, reason, true);
    return;
  }
  Install(plan.entries);
  Trace("planned", task.spec->task_id, -1, kNoNode,
        fmt::format("emergency;victims={}", plan.preempted.size()));
  std::vector<TaskRun*> victims;
  for (TaskId id : plan.preempted) {
    TaskRun& v = tasks_[index_.at(id)];
    Withdraw(v, EntryStatus::kPreempted, FailureReason::kPreempted, false);
    AbortRunning(v, EntryStatus::kPreempted, FailureReason::kPreempted);
    Trace("preempted", id, -1, kNoNode, fmt::format("by={}", task.spec->task_id));
    victims.push_back(&v);
  }
  Replan(victims, FailureReason::kPreempted, "preemption");
}

void Engine::OnArrival(const Event& e) {
  TaskRun& t = tasks_[e.a];
  Trace("task_arrival", t.spec->task_id, -1, kNoNode, fmt::format("p{}", t.spec->priority));
  if (t.state != TaskState::kFuture) return;  // preplanned
  t.state = TaskState::kPending;
  if (t.spec->IsEmergency()) PlanEmergencyTask(t);
}

void Engine::OnPlanTick(const Event& e) {
  const int tier = e.a;
  std::vector<const TaskSpec*> pending;
  for (const TaskRun& t : tasks_) {
    if (t.state == TaskState::kPending && t.spec->priority == tier) pending.push_back(t.spec);
  }
  if (!pending.empty()) {
    const Plan plan = PlanPeriodic(pending, Context(), timeline_);
    Install(plan.entries);
    for (const TaskSpec* spec : pending) {
      const TaskRun& t = tasks_[index_.at(spec->task_id)];
      if (t.state == TaskState::kPlanned) {
        Trace("planned", spec->task_id, -1, kNoNode, fmt::format("tier={}", tier));
      }
    }
    for (const auto& [id, reason] : plan.unplaced) {
      HandleUnplaced(tasks_[index_.at(id)], reason, true);
    }
  }
  if (tier == 3) {
    for (TaskRun& t : tasks_) {
      if (t.state == TaskState::kPending && t.spec->IsEmergency()) PlanEmergencyTask(t);
    }
  }
  Push(now_ + PlanningCycle(tier, cfg_.scheduler), EventKind::kPlanTick, tier, 0, 0,
       3 - tier);
}

void Engine::OnStageStart(const Event& e) {
  TaskRun& t = tasks_[e.a];
  StageRun& s = t.stages[e.b];
  if (t.state != TaskState::kPlanned || s.version != e.c || s.entry < 0 || s.running) return;
  const int idx = s.entry;
  const ScheduleEntry en = entries_[idx];
  for (StageId p : t.spec->Predecessors(en.stage)) {
    if (!t.stages[p].done) {
      Trace("stage_not_ready", en.task, en.stage, en.node);
      Withdraw(t, EntryStatus::kPreempted, FailureReason::kNone, true);
      TaskRun* one[] = {&t};
      Replan(one, FailureReason::kNone, "not_ready");
      return;
    }
  }
  if (cfg_.execution.dispatch_check) {
    const PlanningContext ctx = Context();
    for (const Usage& u : en.usages) {
      if (IsLinkKey(u.key) || ResourceOfKey(u.key) != Resource::kCompute) continue;
      const double limit = ctx.ComputeLimit(NodeOfKey(u.key));
      if (timeline_.PeakUsage(u.key, en.start, en.end) > limit + kEps) {
        Trace("dispatch_replan", en.task, en.stage, en.node,
              fmt::format("view_limit={}", FormatDouble(limit)));
        Withdraw(t, EntryStatus::kPreempted, FailureReason::kNone, true);
        TaskRun* one[] = {&t};
        Replan(one, FailureReason::kNone, "dispatch");
        return;
      }
    }
  }
  for (size_t i = 0; i < en.usages.size(); ++i) {
    const Usage& u = en.usages[i];
    const double free = TruthFree(u, en);
    const std::optional<FailureReason> reason =
        ClassifyExecution(s.view_free[i], free, u.amount);
    if (!reason) continue;
    if (*reason == FailureReason::kInsufficientResources) {
      ++out_.audit.insufficient_at_execution;
    }
    Trace("execution_failure", en.task, en.stage, en.node,
          fmt::format("{};view={};truth={};demand={}", ToString(*reason),
                      FormatDouble(s.view_free[i]), FormatDouble(free),
                      FormatDouble(u.amount)));
    FailTask(t, *reason, "execution");
    entries_[idx].status = EntryStatus::kFailed;
    entries_[idx].fail_reason = *reason;
    return;
  }

  std::vector<Usage> held = en.usages;
  double complete_at = en.end;
  if (IsTransferStage(en.kind)) {
    const StageSpec& st = t.spec->Stage(en.stage);
    s.transfer = RunTransfer(*plan_, en.node, en.peer, now_, st.transfer_gb * 8e9,
                             1.0 - cfg_.scheduler.awareness_link_reserve);
    s.segment = 0;
    const bool fits = s.transfer.finished && s.transfer.segments.size() == 1 &&
                      s.transfer.completion <= en.end + kEps;
    if (!fits && !s.transfer.segments.empty()) {
      // Window ends mid-transfer: hold the first segment's window now and
      // re-plan the rest of the task once the data is through.
      for (Usage& u : held) {
        if (IsLinkKey(u.key)) u.key = LinkKey(s.transfer.segments[0].window);
      }
      if (TruthFree(held.back(), en) < 0.0) {
        FailTask(t, FailureReason::kNoWindow, "transfer");
        return;
      }
      for (StageRun& other : t.stages) {
        if (&other != &s && !other.done && !other.running && other.entry >= 0) {
          t.replan_after_transfer = true;
        }
      }
      // Keep this stage's reservation; drop the successors'.
      const int keep = s.entry;
      s.entry = -1;
      Withdraw(t, EntryStatus::kPreempted, FailureReason::kNone, true);
      s.entry = keep;
      complete_at = -1.0;
    } else {
      s.transfer = {};
    }
  }
  for (const Usage& u : held) Consume(u, en);
  s.held = std::move(held);
  s.running = true;
  entries_[idx].status = EntryStatus::kRunning;
  truth_.AddExecuting(en.node, en.task, en.stage);
  Trace("stage_start", en.task, en.stage, en.node,
        fmt::format("{};end={}", ToString(en.kind), FormatDouble(en.end)));
  if (complete_at >= 0.0) {
    Push(complete_at, EventKind::kStageComplete, e.a, e.b, s.version);
  } else {
    Push(s.transfer.segments[0].end, EventKind::kWindow, e.a, e.b, s.version, 0);
  }
}

void Engine::OnWindow(const Event& e) {
  TaskRun& t = tasks_[e.a];
  StageRun& s = t.stages[e.b];
  if (s.version != e.c || !s.running) return;
  const ScheduleEntry& en = entries_[s.entry];
  const std::vector<TransferSegment>& segs = s.transfer.segments;
  if (e.sub == 0) {
    // Segment end: either the transfer is through or it pauses.
    const bool last = s.segment + 1 >= segs.size();
    if (last && s.transfer.finished) {
      Push(std::max(now_, s.transfer.completion), EventKind::kStageComplete, e.a, e.b,
           s.version);
      return;
    }
    for (const Usage& u : s.held) {
      if (IsLinkKey(u.key)) Release(u, en);
    }
    std::erase_if(s.held, [](const Usage& u) { return IsLinkKey(u.key); });
    Trace("transfer_suspend", en.task, en.stage, en.node,
          fmt::format("window={}", segs[s.segment].window));
    if (last) {
      FailTask(t, FailureReason::kNoWindow, "transfer");
      return;
    }
    ++s.segment;
    Push(segs[s.segment].start, EventKind::kWindow, e.a, e.b, s.version, 1);
    return;
  }
  const Usage link{LinkKey(segs[s.segment].window), 1.0, 1.0};
  if (truth_.LinkResidual(segs[s.segment].window, 1.0) < 1.0 - kEps) {
    FailTask(t, FailureReason::kNoWindow, "transfer resume");
    return;
  }
  Consume(link, en);
  s.held.push_back(link);
  Trace("transfer_resume", en.task, en.stage, en.node,
        fmt::format("window={}", segs[s.segment].window));
  Push(segs[s.segment].end, EventKind::kWindow, e.a, e.b, s.version, 0);
}

void Engine::OnStageComplete(const Event& e) {
  TaskRun& t = tasks_[e.a];
  StageRun& s = t.stages[e.b];
  if (s.version != e.c || !s.running) return;
  ScheduleEntry& en = entries_[s.entry];
  for (const Usage& u : s.held) Release(u, en);
  s.held.clear();
  truth_.RemoveExecuting(en.node, en.task, en.stage);
  s.running = false;
  s.done = true;
  s.output = en.OutputNode();
  s.end = now_;
  en.status = EntryStatus::kCompleted;
  Trace("stage_complete", en.task, en.stage, s.output);
  if (std::all_of(t.stages.begin(), t.stages.end(),
                  [](const StageRun& x) { return x.done; })) {
    CompleteTask(t);
    return;
  }
  if (t.replan_after_transfer) {
    t.replan_after_transfer = false;
    TaskRun* one[] = {&t};
    Replan(one, FailureReason::kNone, "transfer");
  }
}

}  // namespace

namespace {

void Engine::Send(NodeId node, ResourceReport report) {
  const int size = report.SizeBytes();
  RouteOptions opts;
  opts.baseline_isl_relay = cfg_.awareness.baseline_isl_relay;
  ReportRoute route = PlanReportRoute(node, now_, cfg_.mode, *plan_, anchor_of_, size, opts);
  if (!route.dropped) {
    for (int w : route.windows) {
      if (!ledger_.TryCharge(plan_->windows()[w], w, size)) {
        route.dropped = true;
        break;
      }
    }
  }
  if (logs_) {
    out_.awareness.push_back(
        {now_, node, cfg_.mode, route.hops, route.t_deliver, route.dropped});
  }
  if (route.dropped) return;
  std::deque<PendingReport>& q = pending_[node];
  const double d = route.t_deliver;
  const auto covers = [&](const ResourceReport& old) {
    return std::all_of(old.entries.begin(), old.entries.end(), [&](const ReportEntry& x) {
      return std::any_of(report.entries.begin(), report.entries.end(),
                         [&](const ReportEntry& y) { return y.resource == x.resource; });
    });
  };
  // Pending reports that would arrive no earlier with older state add
  // nothing once this one is queued.
  bool event_queued = false;
  for (auto it = q.begin(); it != q.end();) {
    if (it->t_deliver == d) event_queued = true;
    if (it->t_deliver >= d && covers(it->report)) {
      it = q.erase(it);
    } else {
      ++it;
    }
  }
  auto pos = std::upper_bound(q.begin(), q.end(), d, [](double v, const PendingReport& p) {
    return v < p.t_deliver;
  });
  q.insert(pos, PendingReport{next_report_id_++, d, std::move(report)});
  if (!event_queued) Push(d, EventKind::kReportDeliver, node);
}

void Engine::OnReportDeliver(const Event& e) {
  const NodeId node = e.a;
  std::deque<PendingReport>& q = pending_[node];
  while (!q.empty() && q.front().t_deliver <= now_) {
    view_.Merge(q.front().report, q.front().t_deliver);
    q.pop_front();
    last_receipt_[node] = now_;
    registry_.Touch(node, now_);
    if (degraded_[node]) {
      degraded_[node] = false;
      registry_.Transition(node, Lifecycle::kActive, now_);
      Trace("node_recovered", -1, -1, node);
    }
  }
}

void Engine::OnMonitor(const Event&) {
  const int period = static_cast<int>(cfg_.awareness.monitor_interval_s);
  const int phase = static_cast<int>(std::llround(now_)) % period;
  const AwarenessConfig& ac = cfg_.awareness;
  for (NodeId n = phase; n < static_cast<NodeId>(sats_.size()); n += period) {
    const CapabilityDescriptor& d = sats_[n];
    const double bg = bg_.At(n, now_);
    History& h = history_[n];
    h.times.push_back(now_);
    h.values[0].push_back(truth_.Available(n, Resource::kCompute) - bg);
    h.values[1].push_back(truth_.Available(n, Resource::kStorage));
    h.values[2].push_back(truth_.Available(n, Resource::kSensor));
    while (h.times.front() < now_ - ac.history_window_s - kEps) {
      h.times.pop_front();
      for (auto& v : h.values) v.pop_front();
    }
    // Reported values are what the operations centre can orchestrate:
    // capacity net of non-orchestrated load. Its own placements it knows.
    const std::array<double, kNumResources> values = {
        d.compute_gbps - bg, d.storage_gb, d.HasSensor() ? 1.0 : 0.0};
    ResourceReport report;
    report.node_id = n;
    report.generation_time = now_;
    if (cfg_.mode == AwarenessMode::kBaseline) {
      if (now_ + kEps < next_baseline_[n]) continue;
      while (next_baseline_[n] <= now_ + kEps) next_baseline_[n] += ac.baseline_interval_s;
      for (int k = 0; k < kNumResources; ++k) {
        report.entries.push_back({static_cast<Resource>(k), values[k], now_});
      }
    } else {
      std::array<Volatility, kNumResources> classes;
      const std::vector<double> times(h.times.begin(), h.times.end());
      const std::array<double, kNumResources> caps = {d.compute_gbps, d.storage_gb, 1.0};
      for (int k = 0; k < kNumResources; ++k) {
        const std::vector<double> v(h.values[k].begin(), h.values[k].end());
        classes[k] = ClassifyVolatility(times, v, caps[k], ac.thresholds);
      }
      for (Resource r : clocks_[n].Due(now_, values, classes, ac.policy)) {
        report.entries.push_back({r, values[static_cast<int>(r)], now_});
        clocks_[n].MarkSent(r, now_, values[static_cast<int>(r)]);
      }
      if (report.entries.empty()) continue;
    }
    Send(n, std::move(report));
  }
  Push(now_ + 1.0, EventKind::kMonitor);
}

void Engine::OnStalenessSample(const Event&) {
  const Staleness st = ViewStaleness(view_, sat_ids_, now_);
  double sum = 0.0;
  for (double v : st.per_node) sum += v;
  out_.staleness.push_back({now_, static_cast<int>(sat_ids_.size()), sum});
  const AwarenessConfig& ac = cfg_.awareness;
  double expected = ac.baseline_interval_s;
  if (cfg_.mode == AwarenessMode::kYuheng) {
    expected = 0.0;
    for (const ClassPolicy& c : ac.policy.by_class) expected = std::max(expected, c.interval_s);
  }
  const double limit = ac.missed_reports_degraded * expected;
  for (NodeId n : sat_ids_) {
    if (!degraded_[n] && now_ - last_receipt_[n] > limit + kEps) {
      degraded_[n] = true;
      registry_.Transition(n, Lifecycle::kDegraded, now_);
      Trace("node_degraded", -1, -1, n);
    }
  }
  Push(now_ + ac.staleness_sample_s, EventKind::kStalenessSample);
}

void Engine::OnDomainRefresh(const Event&) {
  if (cfg_.mode == AwarenessMode::kYuheng && !anchors_.empty()) {
    const std::vector<AwarenessDomain> domains =
        PartitionDomains(*plan_, sat_ids_, anchors_, now_);
    anchor_of_ = AnchorOf(domains);
    Trace("domain_refresh", -1, -1, kNoNode, fmt::format("domains={}", domains.size()));
  }
  Push(now_ + cfg_.awareness.domain_refresh_s, EventKind::kDomainRefresh);
}

void Engine::Setup() {
  const int sats = static_cast<int>(sats_.size());
  info_.assign(plan_->NodeCount(), NodeInfo{});
  for (const CapabilityDescriptor& d : sats_) {
    registry_.Register(d, 0.0);
    registry_.Activate(d.node_id, 0.0);
    truth_.AddNode(d);
    sat_ids_.push_back(d.node_id);
    info_[d.node_id] = {registry_.IsSchedulable(d.node_id), d.regime, d.compute_gbps,
                        d.storage_gb, d.HasSensor()};
    clocks_.emplace_back(std::array<double, kNumResources>{d.compute_gbps, d.storage_gb, 1.0});
    if (d.regime == Regime::kMeo || d.regime == Regime::kGeo) anchors_.push_back(d.node_id);
  }
  for (int i = sats; i < plan_->NodeCount(); ++i) info_[i].regime = Regime::kGround;
  if (anchors_.empty()) {
    for (size_t i = 0; i < plan_->stations().size(); ++i) {
      anchors_.push_back(plan_->StationId(static_cast<int>(i)));
    }
  }
  history_.assign(sats, {});
  next_baseline_.assign(sats, 0.0);
  last_receipt_.assign(sats, 0.0);
  degraded_.assign(sats, false);
  pending_.assign(sats, {});

  tasks_.resize(specs_.size());
  for (size_t i = 0; i < specs_.size(); ++i) {
    TaskRun& t = tasks_[i];
    t.spec = &specs_[i];
    t.stages.resize(specs_[i].stages.size());
    if (!index_.emplace(specs_[i].task_id, static_cast<int>(i)).second) {
      throw ValidationError(fmt::format("duplicate task id {}", specs_[i].task_id));
    }
    Push(specs_[i].arrival, EventKind::kTaskArrival, static_cast<int>(i));
  }
  if (!inputs_.preplanned.empty()) {
    Commit(inputs_.preplanned, timeline_);
    Install(inputs_.preplanned);
  }
  Push(0.0, EventKind::kDomainRefresh);
  Push(0.0, EventKind::kMonitor);
  Push(0.0, EventKind::kStalenessSample);
  for (int tier = 3; tier >= 1; --tier) {
    Push(PlanningCycle(tier, cfg_.scheduler), EventKind::kPlanTick, tier, 0, 0, 3 - tier);
  }
}

RunResult Engine::Run() {
  Setup();
  const double horizon = cfg_.horizon_s;
  while (!queue_.empty()) {
    const Event e = queue_.top();
    if (e.t > horizon) break;
    queue_.pop();
    if (e.t < now_ - kEps) ++out_.audit.causality_violations;
    now_ = std::max(now_, e.t);
    truth_.AdvanceTo(now_);
    ++out_.events;
    switch (e.kind) {
      case EventKind::kWindow: OnWindow(e); break;
      case EventKind::kReportDeliver: OnReportDeliver(e); break;
      case EventKind::kStageComplete: OnStageComplete(e); break;
      case EventKind::kStageStart: OnStageStart(e); break;
      case EventKind::kPlanTick: OnPlanTick(e); break;
      case EventKind::kTaskArrival: OnArrival(e); break;
      case EventKind::kDomainRefresh: OnDomainRefresh(e); break;
      case EventKind::kMonitor: OnMonitor(e); break;
      case EventKind::kStalenessSample: OnStalenessSample(e); break;
    }
  }
  now_ = std::max(now_, horizon);
  Finish();
  return std::move(out_);
}

void Engine::Finish() {
  for (TaskRun& t : tasks_) {
    if (t.state == TaskState::kCompleted || t.state == TaskState::kFailed) continue;
    // Still open at the horizon: running stages keep their resources.
    const FailureReason reason = t.last_reason != FailureReason::kNone
                                     ? t.last_reason
                                     : FailureReason::kDeadlineInfeasible;
    Withdraw(t, EntryStatus::kFailed, reason, true);
    t.state = TaskState::kFailed;
    t.last_reason = reason;
    t.finish = now_;
    Trace("task_failed", t.spec->task_id, -1, kNoNode,
          fmt::format("{};horizon", ToString(reason)));
  }

  // Conservation: consumed = released + held by stages still running.
  std::map<uint64_t, double> held;
  for (const TaskRun& t : tasks_) {
    for (const StageRun& s : t.stages) {
      if (!s.running) continue;
      for (const Usage& u : s.held) held[u.key] += u.amount;
    }
  }
  std::map<uint64_t, bool> keys;
  for (const auto& [k, v] : consumed_) keys[k] = true;
  for (const auto& [k, v] : released_) keys[k] = true;
  for (const auto& [k, v] : held) keys[k] = true;
  for (const auto& [k, unused] : keys) {
    const double c = consumed_.count(k) ? consumed_.at(k) : 0.0;
    const double r = released_.count(k) ? released_.at(k) : 0.0;
    const double h = held.count(k) ? held.at(k) : 0.0;
    double truth_used = 0.0;
    if (IsLinkKey(k)) {
      truth_used = 1.0 - truth_.LinkResidual(WindowOfKey(k), 1.0);
    } else {
      truth_used = truth_.Reserved(NodeOfKey(k), ResourceOfKey(k));
    }
    const double tol = 1e-6 * std::max(1.0, c);
    if (std::abs(c - r - h) > tol || std::abs(truth_used - h) > tol) {
      out_.audit.conservation.push_back(
          fmt::format("key {}: consumed {} released {} held {} truth {}", k, c, r, h,
                      truth_used));
    }
  }
  out_.audit.timeline = AuditTimelines(timeline_);

  for (const TaskRun& t : tasks_) {
    TaskRecord r;
    r.task_id = t.spec->task_id;
    r.priority = t.spec->priority;
    r.arrival = t.spec->arrival;
    r.deadline = t.spec->deadline;
    r.completed = t.state == TaskState::kCompleted;
    r.fail_reason = r.completed ? FailureReason::kNone : t.last_reason;
    r.finish = t.finish;
    out_.tasks.push_back(r);
    const bool any = std::any_of(t.stages.begin(), t.stages.end(),
                                 [](const StageRun& s) { return s.version > 0; });
    if (!r.completed && !any) out_.unplaced.emplace_back(r.task_id, r.fail_reason);
  }
  out_.entries = entries_;
  out_.metrics = ComputeMetrics(out_.tasks, out_.staleness);
  out_.row = MakeMetricsRow(out_.metrics, static_cast<int>(sats_.size()),
                            static_cast<int>(tasks_.size()), cfg_.mode, cfg_.seed);
}

}  // namespace

RunResult RunScenario(const ScenarioConfig& config, const ScenarioInputs& inputs) {
  config.Validate();
  std::shared_ptr<const ContactPlan> plan = inputs.plan ? inputs.plan : BuildContactPlan(config);
  std::vector<TaskSpec> tasks = inputs.tasks ? *inputs.tasks : BuildWorkload(config);
  for (const TaskSpec& t : tasks) t.Validate();
  Engine engine(config, std::move(plan), std::move(tasks), inputs);
  return engine.Run();
}

void WriteRunOutputs(const std::string& dir, const ScenarioConfig& config,
                     const RunResult& result, const ContactPlan& plan,
                     std::span<const TaskSpec> tasks) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir, ec.message()));
  const auto open = [&](const char* name) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream f(path);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", path));
    return f;
  };
  {
    std::ofstream f = open("trace.csv");
    WriteTraceCsv(f, result.trace);
  }
  {
    std::ofstream f = open("tasks.csv");
    WriteTaskRecordsCsv(f, result.tasks);
  }
  {
    std::ofstream f = open("awareness_log.csv");
    WriteAwarenessLogCsv(f, result.awareness);
  }
  {
    std::ofstream f = open("staleness.csv");
    WriteStalenessCsv(f, result.staleness);
  }
  {
    std::ofstream f = open("plans.csv");
    WritePlanCsv(f, result.entries, result.unplaced);
  }
  {
    std::ofstream f = open("registry.csv");
    Registry reg;
    for (const CapabilityDescriptor& d : BuildNodes(config, plan)) reg.Register(d);
    reg.WriteCsv(f);
  }
  {
    std::ofstream f = open("contact_plan.csv");
    plan.WriteCsv(f);
  }
  {
    std::ofstream f = open("workload.csv");
    WriteWorkloadCsv(f, tasks);
  }
  const std::vector<MetricsRow> rows = {result.row};
  {
    std::ofstream f = open("metrics.csv");
    WriteMetricsCsv(f, rows);
  }
  {
    std::ofstream f = open("summary.txt");
    f << "scenario " << config.name << " seed " << config.seed << " mode "
      << ToString(config.mode) << "\n";
    f << "tasks " << result.metrics.total << " completed " << result.metrics.completed
      << " failed " << result.metrics.failed << "\n";
    for (int k = 1; k < kNumFailureReasons; ++k) {
      f << "  failed " << ToString(static_cast<FailureReason>(k)) << " "
        << result.metrics.failed_by_reason[k] << "\n";
    }
    f << "audit " << (result.audit.ok() ? "ok" : "FAILED") << "\n\n";
    WriteSummary(f, rows);
  }
}

}  // namespace cnsc
