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

// Exhaustive planner for tiny instances. It shares no search code with the
// greedy placer: every subset of tasks is tried in decreasing weight, and a
// subset is feasible if some precedence-feasible stage order with some
// choice of node/window per stage places everything by its deadline when
// each stage takes the earliest free second on per-second occupancy arrays.

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "cnsc/scheduler.h"

namespace cnsc {

namespace {

struct Need {
  uint64_t key;
  double amount;
  double limit;
};

struct Mode {
  std::vector<Need> needs;
  NodeId out_node = kNoNode;
  // Allowed interval for [start, end).
  double lo = 0.0;
  double hi = 0.0;
  const ContactWindow* window = nullptr;
  double rate = 0.0;
  double fixed = 0.0;  // duration when not a transfer
};

class Oracle {
 public:
  Oracle(std::span<const TaskSpec> tasks, const PlanningContext& ctx)
      : tasks_(tasks), ctx_(ctx) {
    double horizon = 0.0;
    for (const TaskSpec& t : tasks) horizon = std::max(horizon, t.deadline);
    horizon_ = static_cast<int>(std::ceil(horizon)) + 1;
  }

  bool Feasible(const std::vector<int>& subset) {
    occ_.clear();
    placed_.assign(tasks_.size(), {});
    out_.assign(tasks_.size(), {});
    end_.assign(tasks_.size(), {});
    for (int i : subset) {
      placed_[i].assign(tasks_[i].stages.size(), false);
      out_[i].assign(tasks_[i].stages.size(), kNoNode);
      end_[i].assign(tasks_[i].stages.size(), 0.0);
    }
    subset_ = subset;
    remaining_ = 0;
    for (int i : subset) remaining_ += static_cast<int>(tasks_[i].stages.size());
    return Search();
  }

 private:
  std::span<const TaskSpec> tasks_;
  const PlanningContext& ctx_;
  int horizon_ = 0;
  std::vector<int> subset_;
  int remaining_ = 0;
  std::map<uint64_t, std::vector<double>> occ_;
  std::vector<std::vector<bool>> placed_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<double>> end_;

  std::vector<double>& Occ(uint64_t key) {
    auto& v = occ_[key];
    if (v.empty()) v.assign(horizon_, 0.0);
    return v;
  }

  bool Usable(NodeId n) const {
    return n >= 0 && n < static_cast<NodeId>(ctx_.nodes.size()) && ctx_.nodes[n].schedulable;
  }

  double Duration(const Mode& m, const StageSpec& st, int s) const {
    if (!m.window) return m.fixed;
    const double raw =
        st.transfer_gb * 8e9 / m.rate + ctx_.plan->PropagationDelayS(*m.window, s);
    return std::max(1.0, std::ceil(raw - 1e-9));
  }

  std::vector<Mode> Modes(const TaskSpec& t, const StageSpec& st, NodeId input) const {
    std::vector<Mode> modes;
    const SchedulerConfig& cfg = *ctx_.config;
    if (st.kind == StageKind::kSensing) {
      if (t.target < 0) return modes;
      for (const AccessWindow& a : ctx_.plan->accesses()) {
        if (a.target != t.target || !Usable(a.satellite) || !ctx_.nodes[a.satellite].sensor) {
          continue;
        }
        Mode m;
        m.out_node = a.satellite;
        m.lo = a.start;
        m.hi = a.end;
        m.fixed = std::max(1.0, std::ceil(st.sensing_duration_s - 1e-9));
        m.needs.push_back({NodeKey(a.satellite, Resource::kSensor), 1.0, 1.0});
        if (st.output_gb > 0) {
          m.needs.push_back({NodeKey(a.satellite, Resource::kStorage), st.output_gb,
                             ctx_.StorageLimit(a.satellite)});
        }
        modes.push_back(m);
      }
      return modes;
    }
    if (IsComputeStage(st.kind)) {
      for (NodeId n = 0; n < static_cast<NodeId>(ctx_.nodes.size()); ++n) {
        if (!Usable(n) || (input != kNoNode && n != input)) continue;
        const double limit = ctx_.ComputeLimit(n);
        double rate = limit;
        if (cfg.max_compute_rate_gbps > 0) rate = std::min(rate, cfg.max_compute_rate_gbps);
        if (rate <= 1e-9) continue;
        Mode m;
        m.out_node = n;
        m.lo = 0.0;
        m.hi = 1e300;
        m.fixed = std::max(
            1.0, std::ceil(st.compute_gb / (rate * cfg.Efficiency(t.type, ctx_.nodes[n].regime)) -
                           1e-9));
        m.needs.push_back({NodeKey(n, Resource::kCompute), rate, limit});
        if (st.input_gb > 0) {
          m.needs.push_back({NodeKey(n, Resource::kStorage), st.input_gb, ctx_.StorageLimit(n)});
        }
        modes.push_back(m);
      }
      return modes;
    }
    const bool ground = st.kind == StageKind::kDistribution;
    const auto& ws = ctx_.plan->windows();
    for (size_t wi = 0; wi < ws.size(); ++wi) {
      const ContactWindow& w = ws[wi];
      for (NodeId src : {w.a, w.b}) {
        if (input != kNoNode ? src != input : !Usable(src)) continue;
        const NodeId dst = src == w.a ? w.b : w.a;
        if (ground) {
          if (!ctx_.plan->IsStation(dst)) continue;
        } else {
          if (ctx_.plan->IsStation(dst) || !Usable(dst) ||
              w.link_class == LinkClass::kGround) {
            continue;
          }
        }
        Mode m;
        m.out_node = dst;
        m.lo = w.start;
        m.hi = w.end;
        m.window = &w;
        m.rate = w.capacity_bps * (1.0 - cfg.awareness_link_reserve);
        m.needs.push_back({LinkKey(static_cast<int>(wi)), 1.0, 1.0});
        modes.push_back(m);
      }
    }
    return modes;
  }

  bool Search() {
    if (remaining_ == 0) return true;
    for (int ti : subset_) {
      const TaskSpec& t = tasks_[ti];
      for (const StageSpec& st : t.stages) {
        if (placed_[ti][st.stage_id]) continue;
        double ready = std::max(ctx_.t_now, t.arrival);
        NodeId input = kNoNode;
        bool eligible = true;
        bool mixed = false;
        for (const auto& [from, to] : t.edges) {
          if (to != st.stage_id) continue;
          if (!placed_[ti][from]) {
            eligible = false;
            break;
          }
          ready = std::max(ready, end_[ti][from]);
          if (input != kNoNode && input != out_[ti][from]) mixed = true;
          input = out_[ti][from];
        }
        if (!eligible) continue;
        if (mixed) return false;  // this stage can never be placed
        if (st.kind == StageKind::kSensing) input = kNoNode;
        for (const Mode& m : Modes(t, st, input)) {
          const int lo = static_cast<int>(std::ceil(std::max(ready, m.lo) - 1e-9));
          const double hi = std::min(m.hi, t.deadline);
          for (int s = lo; s < horizon_; ++s) {
            const double d = Duration(m, st, s);
            if (s + d > hi + 1e-9) break;
            if (!Fits(m, s, static_cast<int>(d))) continue;
            Apply(m, s, static_cast<int>(d), +1.0);
            placed_[ti][st.stage_id] = true;
            out_[ti][st.stage_id] = m.out_node;
            end_[ti][st.stage_id] = s + d;
            --remaining_;
            const bool ok = Search();
            ++remaining_;
            placed_[ti][st.stage_id] = false;
            Apply(m, s, static_cast<int>(d), -1.0);
            if (ok) return true;
            break;  // only the earliest start of this mode
          }
        }
      }
    }
    return false;
  }

  bool Fits(const Mode& m, int s, int d) {
    for (const Need& n : m.needs) {
      if (n.amount > n.limit + 1e-9) return false;
      const auto& v = Occ(n.key);
      for (int k = s; k < s + d; ++k) {
        if (k >= horizon_) return false;
        if (v[k] + n.amount > n.limit + 1e-9) return false;
      }
    }
    return true;
  }

  void Apply(const Mode& m, int s, int d, double sign) {
    for (const Need& n : m.needs) {
      auto& v = Occ(n.key);
      for (int k = s; k < s + d; ++k) v[k] += sign * n.amount;
    }
  }
};

}  // namespace

BruteForceResult BruteForcePlan(std::span<const TaskSpec> tasks,
                                const PlanningContext& ctx) {
  if (!ctx.plan || !ctx.config) {
    throw ValidationError("brute force needs a contact plan and a config");
  }
  int schedulable = 0;
  for (const NodeInfo& n : ctx.nodes) schedulable += n.schedulable ? 1 : 0;
  if (tasks.size() > 3 || schedulable > 3 || ctx.plan->windows().size() > 4) {
    throw ValidationError(fmt::format(
        "instance too large for brute force: {} tasks, {} nodes, {} windows",
        tasks.size(), schedulable, ctx.plan->windows().size()));
  }
  if (ctx.config->grid_s != 1.0) throw ValidationError("brute force assumes a 1 s grid");

  const int n = static_cast<int>(tasks.size());
  std::vector<std::pair<int, int>> subsets;  // (weight, mask)
  for (int mask = 0; mask < (1 << n); ++mask) {
    int w = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) w += tasks[i].priority;
    }
    subsets.emplace_back(w, mask);
  }
  std::sort(subsets.begin(), subsets.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  Oracle oracle(tasks, ctx);
  for (const auto& [w, mask] : subsets) {
    std::vector<int> subset;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) subset.push_back(i);
    }
    if (oracle.Feasible(subset)) {
      BruteForceResult r;
      r.weight = w;
      for (int i : subset) r.placed.push_back(tasks[i].task_id);
      return r;
    }
  }
  return {};
}

}  // namespace cnsc
