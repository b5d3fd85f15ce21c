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

#include "cnsc/scheduler.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "cnsc/util.h"

namespace cnsc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

double CeilGrid(double t, double grid) {
  return std::ceil(t / grid - 1e-9) * grid + 0.0;
}

// Peak of the summed amounts of `items` over [start, end).
double PeakOf(std::vector<std::pair<double, double>>& events) {
  // events: (time, delta); ends sort before starts at equal times.
  std::sort(events.begin(), events.end());
  double cur = 0.0;
  double peak = 0.0;
  for (const auto& [t, d] : events) {
    cur += d;
    peak = std::max(peak, cur);
  }
  return peak;
}

}  // namespace

std::string_view ToString(FailureReason reason) {
  switch (reason) {
    case FailureReason::kNone:
      return "";
    case FailureReason::kInsufficientResources:
      return "insufficient_resources";
    case FailureReason::kNoWindow:
      return "no_window";
    case FailureReason::kDeadlineInfeasible:
      return "deadline_infeasible";
    case FailureReason::kPreempted:
      return "preempted";
    case FailureReason::kStaleViewConflict:
      return "stale_view_conflict";
  }
  return "?";
}

FailureReason ParseFailureReason(std::string_view text) {
  for (int k = 0; k <= static_cast<int>(FailureReason::kStaleViewConflict); ++k) {
    if (ToString(static_cast<FailureReason>(k)) == text) {
      return static_cast<FailureReason>(k);
    }
  }
  throw ValidationError("unknown failure reason '" + std::string(text) + "'");
}

std::string_view ToString(EntryStatus s) {
  switch (s) {
    case EntryStatus::kPlanned:
      return "planned";
    case EntryStatus::kRunning:
      return "running";
    case EntryStatus::kCompleted:
      return "completed";
    case EntryStatus::kFailed:
      return "failed";
    case EntryStatus::kPreempted:
      return "preempted";
  }
  return "?";
}

std::string KeyName(uint64_t key) {
  if (IsLinkKey(key)) return fmt::format("window {}", key & ((uint64_t{1} << 62) - 1));
  return fmt::format("node {} {}", key >> 2, ToString(static_cast<Resource>(key & 3)));
}

// ---------------------------------------------------------------------------
// ResourceTimeline

double ResourceTimeline::PeakUsage(uint64_t key, double start, double end,
                                   TaskId ignore_task) const {
  auto it = lanes_.find(key);
  if (it == lanes_.end()) return 0.0;
  const Lane& lane = it->second;
  std::vector<std::pair<double, double>> events;
  auto first = std::lower_bound(
      lane.items.begin(), lane.items.end(), start - lane.max_len,
      [](const Reservation& r, double v) { return r.start < v; });
  for (auto r = first; r != lane.items.end() && r->start < end; ++r) {
    if (r->end <= start || r->task == ignore_task) continue;
    events.emplace_back(std::max(r->start, start), r->amount);
    events.emplace_back(std::min(r->end, end), -r->amount);
  }
  return PeakOf(events);
}

std::optional<double> ResourceTimeline::Conflict(uint64_t key, double start,
                                                 double end, double amount,
                                                 double limit) const {
  if (amount > limit + kEps) return kInf;
  auto it = lanes_.find(key);
  if (it == lanes_.end()) return std::nullopt;
  const Lane& lane = it->second;
  std::vector<std::pair<double, double>> events;
  double earliest_end = kInf;
  auto first = std::lower_bound(
      lane.items.begin(), lane.items.end(), start - lane.max_len,
      [](const Reservation& r, double v) { return r.start < v; });
  for (auto r = first; r != lane.items.end() && r->start < end; ++r) {
    if (r->end <= start) continue;
    events.emplace_back(std::max(r->start, start), r->amount);
    events.emplace_back(std::min(r->end, end), -r->amount);
    earliest_end = std::min(earliest_end, r->end);
  }
  if (events.empty()) return std::nullopt;
  if (PeakOf(events) + amount <= limit + kEps) return std::nullopt;
  return earliest_end;
}

int ResourceTimeline::CountOverlapping(uint64_t key, double start, double end) const {
  auto it = lanes_.find(key);
  if (it == lanes_.end()) return 0;
  const Lane& lane = it->second;
  int n = 0;
  auto first = std::lower_bound(
      lane.items.begin(), lane.items.end(), start - lane.max_len,
      [](const Reservation& r, double v) { return r.start < v; });
  for (auto r = first; r != lane.items.end() && r->start < end; ++r) {
    if (r->end > start) ++n;
  }
  return n;
}

void ResourceTimeline::Add(uint64_t key, Reservation r) {
  if (!(r.end > r.start)) {
    throw ValidationError(fmt::format("empty reservation on {}", KeyName(key)));
  }
  if (r.seq == 0) r.seq = ++next_seq_;
  next_seq_ = std::max(next_seq_, r.seq);
  Lane& lane = lanes_[key];
  auto pos = std::upper_bound(lane.items.begin(), lane.items.end(), r,
                              [](const Reservation& a, const Reservation& b) {
                                if (a.start != b.start) return a.start < b.start;
                                return a.seq < b.seq;
                              });
  lane.items.insert(pos, r);
  lane.max_len = std::max(lane.max_len, r.end - r.start);
  auto& keys = task_keys_[r.task];
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  task_priority_[r.task] = r.priority;
}

std::vector<std::pair<uint64_t, Reservation>> ResourceTimeline::RemoveTask(TaskId task,
                                                                           double t) {
  std::vector<std::pair<uint64_t, Reservation>> removed;
  auto kit = task_keys_.find(task);
  if (kit == task_keys_.end()) return removed;
  std::vector<uint64_t> still;
  for (uint64_t key : kit->second) {
    Lane& lane = lanes_[key];
    bool keep_key = false;
    auto out = lane.items.begin();
    for (auto it = lane.items.begin(); it != lane.items.end(); ++it) {
      if (it->task == task && it->end > t) {
        removed.emplace_back(key, *it);
      } else {
        if (it->task == task) keep_key = true;
        *out++ = *it;
      }
    }
    lane.items.erase(out, lane.items.end());
    if (keep_key) still.push_back(key);
  }
  if (still.empty()) {
    task_keys_.erase(kit);
  } else {
    kit->second = std::move(still);
  }
  return removed;
}

void ResourceTimeline::RemoveStage(uint64_t key, TaskId task, StageId stage) {
  auto it = lanes_.find(key);
  if (it == lanes_.end()) return;
  auto& items = it->second.items;
  auto r = std::find_if(items.begin(), items.end(), [&](const Reservation& x) {
    return x.task == task && x.stage == stage;
  });
  if (r == items.end()) return;
  items.erase(r);
  if (std::none_of(items.begin(), items.end(),
                   [&](const Reservation& x) { return x.task == task; })) {
    auto kit = task_keys_.find(task);
    if (kit != task_keys_.end()) {
      auto& keys = kit->second;
      keys.erase(std::remove(keys.begin(), keys.end(), key), keys.end());
      if (keys.empty()) task_keys_.erase(kit);
    }
  }
}

std::span<const Reservation> ResourceTimeline::At(uint64_t key) const {
  auto it = lanes_.find(key);
  if (it == lanes_.end()) return {};
  return it->second.items;
}

std::vector<uint64_t> ResourceTimeline::Keys() const {
  std::vector<uint64_t> keys;
  for (const auto& [k, lane] : lanes_) {
    if (!lane.items.empty()) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::vector<TaskId> ResourceTimeline::TasksActiveAfter(double t) const {
  std::vector<TaskId> out;
  for (const auto& [task, keys] : task_keys_) {
    bool active = false;
    for (uint64_t key : keys) {
      for (const Reservation& r : At(key)) {
        if (r.task == task && r.end > t) {
          active = true;
          break;
        }
      }
      if (active) break;
    }
    if (active) out.push_back(task);
  }
  return out;
}

int ResourceTimeline::PriorityOf(TaskId task) const {
  auto it = task_priority_.find(task);
  return it == task_priority_.end() ? 0 : it->second;
}

size_t ResourceTimeline::size() const {
  size_t n = 0;
  for (const auto& [k, lane] : lanes_) n += lane.items.size();
  return n;
}

// ---------------------------------------------------------------------------
// Configuration and context

void SchedulerConfig::Validate() const {
  for (double c : cycle_s) {
    if (!(c > 0.0)) throw ValidationError("planning cycles must be > 0");
  }
  if (!(cycle_s[2] < cycle_s[1] && cycle_s[1] < cycle_s[0])) {
    throw ValidationError(
        "planning cycles must strictly decrease with priority (p3 < p2 < p1)");
  }
  if (!(headroom_fraction >= 0.0 && headroom_fraction < 1.0)) {
    throw ValidationError("headroom fraction must be in [0, 1)");
  }
  if (max_compute_rate_gbps < 0.0) {
    throw ValidationError("max compute rate must be >= 0");
  }
  if (!(awareness_link_reserve >= 0.0 && awareness_link_reserve < 1.0)) {
    throw ValidationError("awareness link reserve must be in [0, 1)");
  }
  if (!(grid_s > 0.0)) throw ValidationError("grid must be > 0");
  if (expansion_budget < 1 || preemption_budget < 1) {
    throw ValidationError("search budgets must be >= 1");
  }
  for (const auto& [k, v] : efficiency) {
    if (!(v > 0.0)) throw ValidationError("efficiency multipliers must be > 0");
  }
}

double SchedulerConfig::Efficiency(const std::string& type, Regime regime) const {
  auto it = efficiency.find({type, regime});
  return it == efficiency.end() ? 1.0 : it->second;
}

double PlanningCycle(int priority, const SchedulerConfig& config) {
  if (priority < 1 || priority > 3) {
    throw ValidationError(fmt::format(
        "priority {} has no planning cycle (emergency tasks are event-triggered)",
        priority));
  }
  return config.cycle_s[priority - 1];
}

double PlanningContext::ComputeLimit(NodeId n) const {
  const NodeInfo& info = nodes[n];
  double v = info.compute_bound;
  if (view) {
    const auto& e = view->Get(n, Resource::kCompute);
    if (e.present) v = std::min(e.value, info.compute_bound);
  }
  return std::max(0.0, v - config->headroom_fraction * info.compute_bound);
}

double PlanningContext::StorageLimit(NodeId n) const {
  const NodeInfo& info = nodes[n];
  double v = info.storage_bound;
  if (view) {
    const auto& e = view->Get(n, Resource::kStorage);
    if (e.present) v = std::min(e.value, info.storage_bound);
  }
  return std::max(0.0, v);
}

double PlanningContext::ViewTs(NodeId n) const {
  if (!view) return 0.0;
  return view->NodeStateTs(n).value_or(0.0);
}

double ComputeStageDuration(double compute_gb, double rate_gbps, double efficiency,
                            double grid_s) {
  const double raw = compute_gb / (rate_gbps * efficiency);
  return std::max(grid_s, CeilGrid(raw, grid_s));
}

double TransferStageDuration(double transfer_gb, double rate_bps, double prop_s,
                             double grid_s) {
  const double raw = transfer_gb * 8e9 / rate_bps + prop_s;
  return std::max(grid_s, CeilGrid(raw, grid_s));
}

// ---------------------------------------------------------------------------
// Placement

namespace {

// Tentative reservations of the task being placed, checked together with
// the committed timeline.
struct Scratch {
  std::vector<std::pair<uint64_t, Reservation>> items;
};

std::optional<double> ConflictWith(const ResourceTimeline& tl, const Scratch& scratch,
                                   uint64_t key, double start, double end,
                                   double amount, double limit) {
  if (amount > limit + kEps) return kInf;
  // Fast path: nothing tentative on this key.
  bool any = false;
  for (const auto& [k, r] : scratch.items) {
    if (k == key && r.start < end && r.end > start) {
      any = true;
      break;
    }
  }
  if (!any) return tl.Conflict(key, start, end, amount, limit);
  std::vector<std::pair<double, double>> events;
  double earliest_end = kInf;
  for (const Reservation& r : tl.At(key)) {
    if (r.start >= end || r.end <= start) continue;
    events.emplace_back(std::max(r.start, start), r.amount);
    events.emplace_back(std::min(r.end, end), -r.amount);
    earliest_end = std::min(earliest_end, r.end);
  }
  for (const auto& [k, r] : scratch.items) {
    if (k != key || r.start >= end || r.end <= start) continue;
    events.emplace_back(std::max(r.start, start), r.amount);
    events.emplace_back(std::min(r.end, end), -r.amount);
    earliest_end = std::min(earliest_end, r.end);
  }
  if (PeakOf(events) + amount <= limit + kEps) return std::nullopt;
  return earliest_end;
}

struct Candidate {
  ScheduleEntry entry;
  int load = 0;
};

class Placer {
 public:
  Placer(const TaskSpec& task, const PlanningContext& ctx,
         const ResourceTimeline& tl, const TaskProgress* progress)
      : task_(task), ctx_(ctx), cfg_(*ctx.config), tl_(tl), progress_(progress) {}

  PlaceResult Run() {
    PlaceResult result;
    const size_t n = task_.stages.size();
    out_node_.assign(n, kNoNode);
    end_.assign(n, 0.0);
    done_.assign(n, false);
    if (progress_) {
      if (progress_->size() != n) {
        throw ValidationError(fmt::format("task {}: progress has {} stages, expected {}",
                                          task_.task_id, progress_->size(), n));
      }
      for (size_t i = 0; i < n; ++i) {
        if ((*progress_)[i].done) {
          done_[i] = true;
          out_node_[i] = (*progress_)[i].output_node;
          end_[i] = (*progress_)[i].end;
        }
      }
    }
    for (StageId s : task_.TopologicalOrder()) {
      if (!done_[s]) order_.push_back(s);
    }
    if (order_.empty()) {
      result.ok = true;
      return result;
    }
    if (ReadyFloor() > task_.deadline) {
      result.reason = FailureReason::kDeadlineInfeasible;
      return result;
    }
    std::vector<ScheduleEntry> chosen;
    const bool ok = Dfs(0, chosen);
    result.expansions = expansions_;
    if (ok) {
      result.ok = true;
      result.entries = std::move(chosen);
    } else {
      result.reason =
          deepest_reason_ == FailureReason::kNone ? FailureReason::kInsufficientResources
                                                  : deepest_reason_;
    }
    return result;
  }

 private:
  const TaskSpec& task_;
  const PlanningContext& ctx_;
  const SchedulerConfig& cfg_;
  const ResourceTimeline& tl_;
  const TaskProgress* progress_;
  std::vector<StageId> order_;
  std::vector<NodeId> out_node_;
  std::vector<double> end_;
  std::vector<bool> done_;
  Scratch scratch_;
  int expansions_ = 0;
  int deepest_ = -1;
  FailureReason deepest_reason_ = FailureReason::kNone;

  double ReadyFloor() const { return std::max(ctx_.t_now, task_.arrival); }

  bool Dfs(size_t depth, std::vector<ScheduleEntry>& chosen) {
    if (depth == order_.size()) return true;
    const StageId sid = order_[depth];
    const StageSpec& stage = task_.Stage(sid);

    double ready = ReadyFloor();
    NodeId input = kNoNode;
    bool mixed = false;
    for (StageId p : task_.Predecessors(sid)) {
      ready = std::max(ready, end_[p]);
      if (input == kNoNode) {
        input = out_node_[p];
      } else if (input != out_node_[p]) {
        mixed = true;
      }
    }
    std::vector<Candidate> cands;
    if (!mixed) cands = Candidates(stage, input, ready, tl_, &scratch_, true);
    if (cands.empty()) {
      if (static_cast<int>(depth) > deepest_) {
        deepest_ = static_cast<int>(depth);
        deepest_reason_ = mixed ? FailureReason::kInsufficientResources
                                : Diagnose(stage, input, ready);
      }
      return false;
    }
    for (Candidate& c : cands) {
      if (++expansions_ > cfg_.expansion_budget) return false;
      const size_t mark = scratch_.items.size();
      for (const Usage& u : c.entry.usages) {
        Reservation r;
        r.start = c.entry.start;
        r.end = c.entry.end;
        r.amount = u.amount;
        r.limit = u.limit;
        r.task = task_.task_id;
        r.stage = sid;
        scratch_.items.emplace_back(u.key, r);
      }
      out_node_[sid] = c.entry.OutputNode();
      end_[sid] = c.entry.end;
      chosen.push_back(c.entry);
      if (Dfs(depth + 1, chosen)) return true;
      chosen.pop_back();
      scratch_.items.resize(mark);
      if (expansions_ > cfg_.expansion_budget) return false;
    }
    return false;
  }

  // Why a stage has no candidate: contention if it fits on an empty
  // timeline, deadline if it fits only past the deadline, otherwise no
  // window (or no resources for compute stages).
  FailureReason Diagnose(const StageSpec& stage, NodeId input, double ready) const {
    const ResourceTimeline empty;
    if (!Candidates(stage, input, ready, empty, nullptr, true).empty()) {
      return FailureReason::kInsufficientResources;
    }
    if (!Candidates(stage, input, ready, empty, nullptr, false).empty()) {
      return FailureReason::kDeadlineInfeasible;
    }
    if (IsComputeStage(stage.kind)) return FailureReason::kInsufficientResources;
    return FailureReason::kNoWindow;
  }

  // Earliest grid start in [lo, hi - duration] at which all usages fit.
  template <typename DurationFn>
  std::optional<double> EarliestFit(const ResourceTimeline& tl, const Scratch* scratch,
                                    const std::vector<Usage>& usages, double lo,
                                    double hi, DurationFn duration) const {
    double s = CeilGrid(lo, cfg_.grid_s);
    static const Scratch kNoScratch;
    const Scratch& sc = scratch ? *scratch : kNoScratch;
    for (int guard = 0; guard < 1000000; ++guard) {
      const double e = s + duration(s);
      if (e > hi + kEps) return std::nullopt;
      double next = s;
      bool ok = true;
      for (const Usage& u : usages) {
        const auto c = ConflictWith(tl, sc, u.key, s, e, u.amount, u.limit);
        if (c) {
          ok = false;
          next = std::max(next, *c);
        }
      }
      if (ok) return s;
      if (next == kInf) return std::nullopt;
      s = CeilGrid(std::max(next, s + cfg_.grid_s * 0.5), cfg_.grid_s);
    }
    return std::nullopt;
  }

  void Finish(std::vector<Candidate>& out, const ResourceTimeline& tl,
              ScheduleEntry e) const {
    Candidate c;
    const NodeId where = e.OutputNode();
    if (!ctx_.plan || !ctx_.plan->IsStation(where)) {
      c.load = tl.CountOverlapping(NodeKey(where, Resource::kCompute), e.start, e.end) +
               tl.CountOverlapping(NodeKey(where, Resource::kStorage), e.start, e.end);
    }
    c.entry = std::move(e);
    out.push_back(std::move(c));
  }

  ScheduleEntry Base(const StageSpec& stage, NodeId node) const {
    ScheduleEntry e;
    e.task = task_.task_id;
    e.stage = stage.stage_id;
    e.kind = stage.kind;
    e.priority = task_.priority;
    e.node = node;
    e.view_ts = ctx_.ViewTs(node);
    return e;
  }

  bool Usable(NodeId n) const {
    return n >= 0 && static_cast<size_t>(n) < ctx_.nodes.size() &&
           ctx_.nodes[n].schedulable;
  }

  std::vector<Candidate> Candidates(const StageSpec& stage, NodeId input, double ready,
                                    const ResourceTimeline& tl, const Scratch* scratch,
                                    bool respect_deadline) const {
    std::vector<Candidate> out;
    const double deadline = respect_deadline ? task_.deadline : kInf;
    switch (stage.kind) {
      case StageKind::kSensing:
        SensingCandidates(stage, ready, deadline, tl, scratch, out);
        break;
      case StageKind::kProcessing:
      case StageKind::kFusion:
        ComputeCandidates(stage, input, ready, deadline, tl, scratch, out);
        break;
      case StageKind::kTransmission:
      case StageKind::kDistribution:
        TransferCandidates(stage, input, ready, deadline, tl, scratch, out);
        break;
    }
    // One candidate per output node: the earliest finish dominates.
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
      if (a.entry.end != b.entry.end) return a.entry.end < b.entry.end;
      if (a.load != b.load) return a.load < b.load;
      if (a.entry.OutputNode() != b.entry.OutputNode()) {
        return a.entry.OutputNode() < b.entry.OutputNode();
      }
      if (a.entry.node != b.entry.node) return a.entry.node < b.entry.node;
      if (a.entry.window != b.entry.window) return a.entry.window < b.entry.window;
      return a.entry.access < b.entry.access;
    });
    std::vector<Candidate> unique;
    std::set<std::pair<NodeId, NodeId>> seen;
    for (Candidate& c : out) {
      if (seen.insert({c.entry.node, c.entry.OutputNode()}).second) {
        unique.push_back(std::move(c));
      }
    }
    return unique;
  }

  void SensingCandidates(const StageSpec& stage, double ready, double deadline,
                         const ResourceTimeline& tl, const Scratch* scratch,
                         std::vector<Candidate>& out) const {
    if (task_.target < 0 || !ctx_.plan) return;
    const auto& accesses = ctx_.plan->accesses();
    const double dur = std::max(cfg_.grid_s, CeilGrid(stage.sensing_duration_s, cfg_.grid_s));
    for (int ai : ctx_.plan->AccessesOf(task_.target)) {
      const AccessWindow& a = accesses[ai];
      if (a.end <= ready || a.start >= deadline) continue;
      const NodeId n = a.satellite;
      if (!Usable(n) || !ctx_.nodes[n].sensor) continue;
      std::vector<Usage> usages = {{NodeKey(n, Resource::kSensor), 1.0, 1.0}};
      if (stage.output_gb > 0.0) {
        usages.push_back({NodeKey(n, Resource::kStorage), stage.output_gb,
                          ctx_.StorageLimit(n)});
      }
      const auto s = EarliestFit(tl, scratch, usages, std::max(ready, a.start),
                                 std::min(a.end, deadline),
                                 [dur](double) { return dur; });
      if (!s) continue;
      ScheduleEntry e = Base(stage, n);
      e.access = ai;
      e.start = *s;
      e.end = *s + dur;
      e.usages = std::move(usages);
      Finish(out, tl, std::move(e));
    }
  }

  void ComputeCandidates(const StageSpec& stage, NodeId input, double ready,
                         double deadline, const ResourceTimeline& tl,
                         const Scratch* scratch, std::vector<Candidate>& out) const {
    std::vector<NodeId> nodes;
    if (input != kNoNode) {
      if (Usable(input)) nodes.push_back(input);
    } else {
      for (size_t i = 0; i < ctx_.nodes.size(); ++i) {
        if (ctx_.nodes[i].schedulable) nodes.push_back(static_cast<NodeId>(i));
      }
    }
    for (NodeId n : nodes) {
      const double limit = ctx_.ComputeLimit(n);
      double rate = limit;
      if (cfg_.max_compute_rate_gbps > 0.0) rate = std::min(rate, cfg_.max_compute_rate_gbps);
      if (!(rate > kEps)) continue;
      const double eff = cfg_.Efficiency(task_.type, ctx_.nodes[n].regime);
      const double dur = ComputeStageDuration(stage.compute_gb, rate, eff, cfg_.grid_s);
      std::vector<Usage> usages = {{NodeKey(n, Resource::kCompute), rate, limit}};
      if (stage.input_gb > 0.0) {
        usages.push_back(
            {NodeKey(n, Resource::kStorage), stage.input_gb, ctx_.StorageLimit(n)});
      }
      const auto s =
          EarliestFit(tl, scratch, usages, ready, deadline, [dur](double) { return dur; });
      if (!s) continue;
      ScheduleEntry e = Base(stage, n);
      e.rate = rate;
      e.start = *s;
      e.end = *s + dur;
      e.usages = std::move(usages);
      Finish(out, tl, std::move(e));
    }
  }

  void TransferCandidates(const StageSpec& stage, NodeId input, double ready,
                          double deadline, const ResourceTimeline& tl,
                          const Scratch* scratch, std::vector<Candidate>& out) const {
    if (!ctx_.plan) return;
    const ContactPlan& plan = *ctx_.plan;
    std::vector<NodeId> sources;
    if (input != kNoNode) {
      sources.push_back(input);
    } else {
      for (size_t i = 0; i < ctx_.nodes.size(); ++i) {
        if (ctx_.nodes[i].schedulable) sources.push_back(static_cast<NodeId>(i));
      }
    }
    const bool to_ground = stage.kind == StageKind::kDistribution;
    const auto& windows = plan.windows();
    for (NodeId src : sources) {
      std::span<const int> list = plan.WindowsOf(src);
      const double lo = ready - plan.MaxWindowLength(src);
      auto it = std::lower_bound(list.begin(), list.end(), lo, [&](int w, double v) {
        return windows[w].start < v;
      });
      for (; it != list.end(); ++it) {
        const int wi = *it;
        const ContactWindow& w = windows[wi];
        if (w.start >= deadline) break;
        if (w.end <= ready) continue;
        const NodeId dst = w.a == src ? w.b : w.a;
        if (plan.IsStation(dst) != to_ground) continue;
        if (!to_ground && (!Usable(dst) || w.link_class == LinkClass::kGround)) continue;
        const double rate = w.capacity_bps * (1.0 - cfg_.awareness_link_reserve);
        const double gb = stage.transfer_gb;
        const double grid = cfg_.grid_s;
        auto dur = [&](double s) {
          return TransferStageDuration(gb, rate, plan.PropagationDelayS(w, s), grid);
        };
        // Cheap reject: the window cannot hold the transfer at all.
        if (gb * 8e9 / rate > w.end - w.start) continue;
        std::vector<Usage> usages = {{LinkKey(wi), 1.0, 1.0}};
        const auto s = EarliestFit(tl, scratch, usages, std::max(ready, w.start),
                                   std::min(w.end, deadline), dur);
        if (!s) continue;
        ScheduleEntry e = Base(stage, src);
        e.peer = dst;
        e.window = wi;
        e.rate = rate;
        e.start = *s;
        e.end = *s + dur(*s);
        e.usages = std::move(usages);
        Finish(out, tl, std::move(e));
      }
    }
  }
};

}  // namespace

PlaceResult PlaceDag(const TaskSpec& task, const PlanningContext& ctx,
                     const ResourceTimeline& timelines, const TaskProgress* progress) {
  if (!ctx.config) throw ValidationError("planning context without scheduler config");
  Placer placer(task, ctx, timelines, progress);
  return placer.Run();
}

void Commit(std::span<const ScheduleEntry> entries, ResourceTimeline& timelines) {
  for (const ScheduleEntry& e : entries) {
    for (const Usage& u : e.usages) {
      Reservation r;
      r.start = e.start;
      r.end = e.end;
      r.amount = u.amount;
      r.limit = u.limit;
      r.task = e.task;
      r.stage = e.stage;
      r.priority = e.priority;
      timelines.Add(u.key, r);
    }
  }
}

Plan PlanPeriodic(std::span<const TaskSpec* const> pending, const PlanningContext& ctx,
                  ResourceTimeline& timelines) {
  std::vector<const TaskSpec*> order(pending.begin(), pending.end());
  std::sort(order.begin(), order.end(), [](const TaskSpec* a, const TaskSpec* b) {
    if (a->priority != b->priority) return a->priority > b->priority;
    if (a->deadline != b->deadline) return a->deadline < b->deadline;
    if (a->arrival != b->arrival) return a->arrival < b->arrival;
    return a->task_id < b->task_id;
  });
  Plan plan;
  for (const TaskSpec* t : order) {
    PlaceResult r = PlaceDag(*t, ctx, timelines);
    if (r.ok) {
      Commit(r.entries, timelines);
      plan.entries.insert(plan.entries.end(), r.entries.begin(), r.entries.end());
    } else {
      plan.unplaced.emplace_back(t->task_id, r.reason);
    }
  }
  return plan;
}

namespace {

using Removed = std::vector<std::pair<uint64_t, Reservation>>;

Removed RemoveVictims(ResourceTimeline& tl, std::span<const TaskId> victims, double t) {
  Removed all;
  for (TaskId v : victims) {
    Removed r = tl.RemoveTask(v, t);
    all.insert(all.end(), r.begin(), r.end());
  }
  return all;
}

void Restore(ResourceTimeline& tl, const Removed& removed) {
  for (const auto& [key, r] : removed) tl.Add(key, r);
}

}  // namespace

Plan PlanEmergency(const TaskSpec& task, const PlanningContext& ctx,
                   ResourceTimeline& timelines) {
  if (task.priority != 4) {
    throw ValidationError(
        fmt::format("task {} has priority {}; the emergency path needs 4", task.task_id,
                    task.priority));
  }
  Plan plan;
  PlaceResult first = PlaceDag(task, ctx, timelines);
  if (first.ok) {
    Commit(first.entries, timelines);
    plan.entries = std::move(first.entries);
    return plan;
  }

  // Preemptible tasks overlapping the emergency's lifetime, ordered by
  // (priority, id).
  std::vector<TaskId> pool;
  for (TaskId id : timelines.TasksActiveAfter(ctx.t_now)) {
    if (id == task.task_id) continue;
    const int p = timelines.PriorityOf(id);
    if (p >= 4) continue;
    bool overlaps = false;
    for (uint64_t key : timelines.Keys()) {
      for (const Reservation& r : timelines.At(key)) {
        if (r.task == id && r.end > ctx.t_now && r.start < task.deadline) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) break;
    }
    if (overlaps) pool.push_back(id);
  }
  std::sort(pool.begin(), pool.end(), [&](TaskId a, TaskId b) {
    const int pa = timelines.PriorityOf(a);
    const int pb = timelines.PriorityOf(b);
    if (pa != pb) return pa < pb;
    return a < b;
  });

  auto fail = [&](FailureReason reason) {
    plan.unplaced.emplace_back(task.task_id, reason);
    return plan;
  };
  if (pool.empty()) return fail(first.reason);

  // Maximal legal preemption first: if even that does not help, stop.
  {
    Removed removed = RemoveVictims(timelines, pool, ctx.t_now);
    PlaceResult all = PlaceDag(task, ctx, timelines);
    Restore(timelines, removed);
    if (!all.ok) return fail(all.reason);
  }

  auto accept = [&](const std::vector<TaskId>& victims) {
    RemoveVictims(timelines, victims, ctx.t_now);
    PlaceResult r = PlaceDag(task, ctx, timelines);
    Commit(r.entries, timelines);
    plan.entries = std::move(r.entries);
    plan.preempted = victims;
    return plan;
  };

  // Exhaustive by victim count, lexicographic over the ordered pool.
  int attempts = 0;
  const int n = static_cast<int>(pool.size());
  for (int k = 1; k <= n && attempts < ctx.config->preemption_budget; ++k) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (attempts < ctx.config->preemption_budget) {
      std::vector<TaskId> victims;
      for (int i : idx) victims.push_back(pool[i]);
      Removed removed = RemoveVictims(timelines, victims, ctx.t_now);
      ++attempts;
      const bool ok = PlaceDag(task, ctx, timelines).ok;
      Restore(timelines, removed);
      if (ok) return accept(victims);
      int i = k - 1;
      while (i >= 0 && idx[i] == n - k + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }

  // Greedy fallback: add victims in pool order until it fits, then drop
  // victims that turn out unnecessary (latest first).
  std::vector<TaskId> victims;
  Removed removed_all;
  for (TaskId v : pool) {
    Removed r = timelines.RemoveTask(v, ctx.t_now);
    removed_all.insert(removed_all.end(), r.begin(), r.end());
    victims.push_back(v);
    if (PlaceDag(task, ctx, timelines).ok) break;
  }
  Restore(timelines, removed_all);
  for (int i = static_cast<int>(victims.size()) - 1; i >= 0; --i) {
    std::vector<TaskId> without = victims;
    without.erase(without.begin() + i);
    Removed r = RemoveVictims(timelines, without, ctx.t_now);
    const bool ok = PlaceDag(task, ctx, timelines).ok;
    Restore(timelines, r);
    if (ok) victims = std::move(without);
  }
  return accept(victims);
}

Plan ReplanTerminated(std::span<const TerminatedTask> tasks, const PlanningContext& ctx,
                      ResourceTimeline& timelines) {
  std::vector<const TerminatedTask*> order;
  for (const TerminatedTask& t : tasks) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const TerminatedTask* a, const TerminatedTask* b) {
    if (a->task->priority != b->task->priority) return a->task->priority > b->task->priority;
    if (a->task->deadline != b->task->deadline) return a->task->deadline < b->task->deadline;
    if (a->task->arrival != b->task->arrival) return a->task->arrival < b->task->arrival;
    return a->task->task_id < b->task->task_id;
  });
  Plan plan;
  for (const TerminatedTask* t : order) {
    const bool all_done = std::all_of(t->progress.begin(), t->progress.end(),
                                      [](const StageProgress& p) { return p.done; });
    if (all_done && t->progress.size() == t->task->stages.size()) {
      plan.completed.push_back(t->task->task_id);
      continue;
    }
    if (ctx.t_now >= t->task->deadline) {
      plan.unplaced.emplace_back(t->task->task_id, FailureReason::kDeadlineInfeasible);
      continue;
    }
    PlaceResult r = PlaceDag(*t->task, ctx, timelines, &t->progress);
    if (r.ok) {
      Commit(r.entries, timelines);
      plan.entries.insert(plan.entries.end(), r.entries.begin(), r.entries.end());
    } else {
      plan.unplaced.emplace_back(t->task->task_id, r.reason);
    }
  }
  return plan;
}

std::vector<size_t> Arbitrate(std::span<const Proposal> proposals,
                              ResourceTimeline& timelines) {
  std::vector<size_t> order(proposals.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (proposals[a].priority != proposals[b].priority) {
      return proposals[a].priority > proposals[b].priority;
    }
    if (proposals[a].timestamp != proposals[b].timestamp) {
      return proposals[a].timestamp < proposals[b].timestamp;
    }
    return a < b;
  });
  std::vector<size_t> admitted;
  for (size_t idx : order) {
    const Proposal& p = proposals[idx];
    std::vector<std::pair<uint64_t, const ScheduleEntry*>> added;
    bool ok = true;
    for (const ScheduleEntry& e : p.entries) {
      for (const Usage& u : e.usages) {
        if (timelines.Conflict(u.key, e.start, e.end, u.amount, u.limit)) {
          ok = false;
          break;
        }
        Reservation r;
        r.start = e.start;
        r.end = e.end;
        r.amount = u.amount;
        r.limit = u.limit;
        r.task = e.task;
        r.stage = e.stage;
        r.priority = e.priority;
        timelines.Add(u.key, r);
        added.emplace_back(u.key, &e);
      }
      if (!ok) break;
    }
    if (ok) {
      admitted.push_back(idx);
    } else {
      for (const auto& [key, e] : added) timelines.RemoveStage(key, e->task, e->stage);
    }
  }
  return admitted;
}

std::vector<std::string> AuditTimelines(const ResourceTimeline& timelines) {
  std::vector<std::string> out;
  for (uint64_t key : timelines.Keys()) {
    const auto items = timelines.At(key);
    for (const Reservation& r : items) {
      std::vector<std::pair<double, double>> events;
      for (const Reservation& o : items) {
        if (o.seq > r.seq || o.start >= r.end || o.end <= r.start) continue;
        events.emplace_back(std::max(o.start, r.start), o.amount);
        events.emplace_back(std::min(o.end, r.end), -o.amount);
      }
      const double peak = PeakOf(events);
      if (peak > r.limit + 1e-6) {
        out.push_back(fmt::format("{}: usage {} exceeds limit {} in [{}, {}) (task {} stage {})",
                                  KeyName(key), peak, r.limit, r.start, r.end, r.task,
                                  r.stage));
      }
    }
  }
  return out;
}

std::vector<std::string> AuditEntries(std::span<const ScheduleEntry> entries,
                                      std::span<const TaskSpec> tasks,
                                      const ContactPlan& plan,
                                      const std::map<TaskId, TaskProgress>* progress) {
  std::vector<std::string> out;
  std::map<TaskId, const TaskSpec*> by_id;
  for (const TaskSpec& t : tasks) by_id[t.task_id] = &t;
  std::map<std::pair<TaskId, StageId>, const ScheduleEntry*> placed;
  for (const ScheduleEntry& e : entries) placed[{e.task, e.stage}] = &e;
  for (const ScheduleEntry& e : entries) {
    auto it = by_id.find(e.task);
    if (it == by_id.end()) {
      out.push_back(fmt::format("entry for unknown task {}", e.task));
      continue;
    }
    const TaskSpec& t = *it->second;
    const std::string who = fmt::format("task {} stage {}", e.task, e.stage);
    if (!(e.end > e.start)) out.push_back(who + ": empty interval");
    if (e.end > t.deadline + kEps) {
      out.push_back(fmt::format("{}: ends at {} after deadline {}", who, e.end, t.deadline));
    }
    if (e.start + kEps < t.arrival) out.push_back(who + ": starts before arrival");
    for (StageId p : t.Predecessors(e.stage)) {
      double pred_end = -kInf;
      NodeId pred_node = kNoNode;
      auto pe = placed.find({e.task, p});
      if (pe != placed.end()) {
        pred_end = pe->second->end;
        pred_node = pe->second->OutputNode();
      } else if (progress) {
        auto pit = progress->find(e.task);
        if (pit != progress->end() && pit->second.at(p).done) {
          pred_end = pit->second[p].end;
          pred_node = pit->second[p].output_node;
        }
      }
      if (pred_end == -kInf) {
        out.push_back(fmt::format("{}: predecessor {} neither placed nor done", who, p));
        continue;
      }
      if (e.start + kEps < pred_end) {
        out.push_back(fmt::format("{}: starts at {} before predecessor {} ends at {}", who,
                                  e.start, p, pred_end));
      }
      if (e.kind != StageKind::kSensing && pred_node != e.node) {
        out.push_back(fmt::format("{}: runs on {} but input is on {}", who, e.node,
                                  pred_node));
      }
    }
    if (IsTransferStage(e.kind)) {
      if (e.window < 0 || e.window >= static_cast<int>(plan.windows().size())) {
        out.push_back(who + ": transfer without a contact window");
        continue;
      }
      const ContactWindow& w = plan.windows()[e.window];
      const bool endpoints = (w.a == e.node && w.b == e.peer) || (w.b == e.node && w.a == e.peer);
      if (!endpoints) out.push_back(who + ": window endpoints do not match");
      if (e.start + kEps < w.start || e.end > w.end + kEps) {
        out.push_back(fmt::format("{}: [{}, {}) outside window [{}, {})", who, e.start,
                                  e.end, w.start, w.end));
      }
      if ((e.kind == StageKind::kDistribution) != plan.IsStation(e.peer)) {
        out.push_back(who + ": destination kind does not match stage kind");
      }
    }
    if (e.kind == StageKind::kSensing) {
      if (e.access < 0 || e.access >= static_cast<int>(plan.accesses().size())) {
        out.push_back(who + ": sensing without an access window");
        continue;
      }
      const AccessWindow& a = plan.accesses()[e.access];
      if (a.satellite != e.node || a.target != t.target) {
        out.push_back(who + ": access window belongs to another satellite or target");
      }
      if (e.start + kEps < a.start || e.end > a.end + kEps) {
        out.push_back(who + ": sensing outside its access window");
      }
    }
  }
  return out;
}

void WritePlanCsv(std::ostream& out, std::span<const ScheduleEntry> entries,
                  std::span<const std::pair<TaskId, FailureReason>> unplaced) {
  out << "task_id,stage_id,node_id,resource,amount,start_s,end_s,status,fail_reason\n";
  for (const ScheduleEntry& e : entries) {
    for (const Usage& u : e.usages) {
      const std::string resource =
          IsLinkKey(u.key) ? std::string("link")
                           : std::string(ToString(static_cast<Resource>(u.key & 3)));
      const NodeId node = IsLinkKey(u.key) ? e.node : static_cast<NodeId>(u.key >> 2);
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", e.task, e.stage, node, resource,
                         FormatDouble(u.amount), FormatDouble(e.start),
                         FormatDouble(e.end), ToString(e.status),
                         ToString(e.fail_reason));
    }
  }
  for (const auto& [task, reason] : unplaced) {
    out << fmt::format("{},,,,,,,failed,{}\n", task, ToString(reason));
  }
}

}  // namespace cnsc
