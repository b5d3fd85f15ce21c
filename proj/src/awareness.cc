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

#include "cnsc/awareness.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cnsc/util.h"

namespace cnsc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Tolerance for interval comparisons on the monitoring grid.
constexpr double kTimeEps = 1e-9;

bool IsAnchorRegime(Regime r) { return r == Regime::kMeo || r == Regime::kGeo; }

NodeId Other(const ContactWindow& w, NodeId self) { return w.a == self ? w.b : w.a; }

// Arrival over one specific window, or nullopt if the transmission does not
// fit before the window closes.
std::optional<double> ArrivalVia(const ContactPlan& plan, const ContactWindow& w,
                                 double ready, double bytes) {
  const double start = std::max(ready, w.start);
  const double tx = bytes * 8.0 / w.capacity_bps;
  if (start + tx > w.end) return std::nullopt;
  return start + tx + plan.PropagationDelayS(w, start);
}

struct Leg {
  double arrival = kInf;
  int window = -1;
  NodeId station = kNoNode;
};

// Earliest arrival at any ground station from `node` starting at `ready`.
Leg EarliestGroundArrival(const ContactPlan& plan, NodeId node, double ready,
                          double bytes) {
  Leg best;
  std::span<const int> list = plan.WindowsOf(node);
  const auto& windows = plan.windows();
  const double lo = ready - plan.MaxWindowLength(node);
  auto it = std::lower_bound(list.begin(), list.end(), lo,
                             [&](int w, double v) { return windows[w].start < v; });
  for (; it != list.end(); ++it) {
    const ContactWindow& w = windows[*it];
    if (w.start >= best.arrival) break;
    if (w.end <= ready || w.link_class != LinkClass::kGround) continue;
    const NodeId other = Other(w, node);
    if (!plan.IsStation(other)) continue;
    const std::optional<double> arr = ArrivalVia(plan, w, ready, bytes);
    if (arr && *arr < best.arrival) best = {*arr, *it, other};
  }
  return best;
}

// Satellites with a window to `node` open at t, with the window index.
std::vector<std::pair<NodeId, int>> OpenNeighbours(const ContactPlan& plan,
                                                   NodeId node, double t) {
  std::vector<std::pair<NodeId, int>> out;
  std::span<const int> list = plan.WindowsOf(node);
  const auto& windows = plan.windows();
  const double lo = t - plan.MaxWindowLength(node);
  auto it = std::lower_bound(list.begin(), list.end(), lo,
                             [&](int w, double v) { return windows[w].start < v; });
  for (; it != list.end(); ++it) {
    const ContactWindow& w = windows[*it];
    if (w.start > t) break;
    if (!w.Contains(t)) continue;
    const NodeId other = Other(w, node);
    if (plan.IsStation(other)) continue;
    out.emplace_back(other, *it);
  }
  return out;
}

}  // namespace

std::vector<AwarenessDomain> PartitionDomains(std::span<const PlacedNode> nodes,
                                              std::span<const PlacedNode> anchors) {
  if (anchors.empty()) {
    throw ValidationError("domain partitioning needs at least one anchor");
  }
  std::vector<PlacedNode> sorted(anchors.begin(), anchors.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const PlacedNode& a, const PlacedNode& b) { return a.id < b.id; });
  std::vector<AwarenessDomain> domains(sorted.size());
  std::unordered_map<NodeId, size_t> anchor_index;
  for (size_t i = 0; i < sorted.size(); ++i) {
    domains[i].anchor = sorted[i].id;
    anchor_index[sorted[i].id] = i;
  }
  for (const PlacedNode& n : nodes) {
    auto self = anchor_index.find(n.id);
    if (self != anchor_index.end()) {
      domains[self->second].members.push_back(n.id);
      continue;
    }
    size_t best = 0;
    double best_d = kInf;
    for (size_t i = 0; i < sorted.size(); ++i) {
      const double d = Distance(n.position, sorted[i].position);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    domains[best].members.push_back(n.id);
  }
  for (auto& d : domains) {
    if (std::find(d.members.begin(), d.members.end(), d.anchor) == d.members.end()) {
      d.members.push_back(d.anchor);
    }
    std::sort(d.members.begin(), d.members.end());
  }
  return domains;
}

std::vector<AwarenessDomain> PartitionDomains(const ContactPlan& plan,
                                              std::span<const NodeId> nodes,
                                              std::span<const NodeId> anchors,
                                              double t) {
  std::vector<PlacedNode> placed_nodes;
  placed_nodes.reserve(nodes.size());
  for (NodeId id : nodes) placed_nodes.push_back({id, plan.Position(id, t)});
  std::vector<PlacedNode> placed_anchors;
  placed_anchors.reserve(anchors.size());
  for (NodeId id : anchors) {
    const Regime r = plan.RegimeOf(id);
    if (!IsAnchorRegime(r) && r != Regime::kGround) {
      throw ValidationError(
          fmt::format("node {} ({}) cannot anchor a domain", id, ToString(r)));
    }
    placed_anchors.push_back({id, plan.Position(id, t)});
  }
  return PartitionDomains(placed_nodes, placed_anchors);
}

std::unordered_map<NodeId, NodeId> AnchorOf(
    std::span<const AwarenessDomain> domains) {
  std::unordered_map<NodeId, NodeId> out;
  for (const auto& d : domains) {
    for (NodeId m : d.members) out[m] = d.anchor;
  }
  return out;
}

std::string_view ToString(Volatility v) {
  switch (v) {
    case Volatility::kRapid:
      return "rapid";
    case Volatility::kModerate:
      return "moderate";
    case Volatility::kStable:
      return "stable";
  }
  return "?";
}

Volatility ParseVolatility(std::string_view text) {
  if (text == "rapid") return Volatility::kRapid;
  if (text == "moderate") return Volatility::kModerate;
  if (text == "stable") return Volatility::kStable;
  throw ValidationError("unknown volatility class '" + std::string(text) +
                        "' (expected rapid|moderate|stable)");
}

double NormalizedVariationRate(std::span<const double> times,
                               std::span<const double> values, double capacity) {
  if (times.size() != values.size()) {
    throw ValidationError("history times and values differ in length");
  }
  if (times.size() < 2 || capacity <= 0.0) return 0.0;
  double sum = 0.0;
  for (size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    if (!(dt > 0.0)) throw ValidationError("history times must strictly increase");
    sum += std::abs(values[i] - values[i - 1]) / capacity / dt;
  }
  return sum / static_cast<double>(times.size() - 1);
}

Volatility ClassifyVolatility(std::span<const double> times,
                              std::span<const double> values, double capacity,
                              const VolatilityThresholds& thresholds) {
  if (times.empty()) throw ValidationError("empty resource history");
  const double v = NormalizedVariationRate(times, values, capacity);
  if (v >= thresholds.rapid_per_s) return Volatility::kRapid;
  if (v >= thresholds.moderate_per_s) return Volatility::kModerate;
  return Volatility::kStable;
}

void ReportingPolicy::Validate() const {
  for (int i = 0; i < 3; ++i) {
    const ClassPolicy& c = by_class[i];
    if (!(c.interval_s > 0.0)) {
      throw ValidationError(fmt::format("{} reporting interval must be > 0",
                                        ToString(static_cast<Volatility>(i))));
    }
    if (!(c.event_threshold > 0.0 && c.event_threshold <= 1.0)) {
      throw ValidationError(fmt::format("{} event threshold must be in (0, 1]",
                                        ToString(static_cast<Volatility>(i))));
    }
  }
  if (!(by_class[0].interval_s < by_class[1].interval_s &&
        by_class[1].interval_s < by_class[2].interval_s)) {
    throw ValidationError(
        "reporting intervals must satisfy rapid < moderate < stable");
  }
}

std::optional<double> ReportingInterval(Volatility v,
                                        const ReportingPolicy& policy) {
  const ClassPolicy& c = policy.For(v);
  if (c.mode == ReportMode::kEventDriven) return std::nullopt;
  return c.interval_s;
}

int ResourceReport::SizeBytes() const {
  return ReportSizeBytes(static_cast<int>(entries.size()));
}

ReportClock::ReportClock(std::array<double, kNumResources> capacities)
    : capacity_(capacities) {}

std::vector<Resource> ReportClock::Due(
    double t, const std::array<double, kNumResources>& values,
    const std::array<Volatility, kNumResources>& classes,
    const ReportingPolicy& policy) const {
  std::vector<Resource> due;
  for (int k = 0; k < kNumResources; ++k) {
    const ClassPolicy& c = policy.For(classes[k]);
    bool fire = !sent_[k];
    if (!fire) {
      if (c.mode != ReportMode::kEventDriven) {
        fire = t - last_sent_t_[k] >= c.interval_s - kTimeEps;
      }
      if (c.mode != ReportMode::kPeriodic) {
        const double cap = capacity_[k] > 0.0 ? capacity_[k] : 1.0;
        fire = fire || std::abs(values[k] - last_sent_value_[k]) / cap >=
                           c.event_threshold - kTimeEps;
      }
    }
    if (fire) due.push_back(static_cast<Resource>(k));
  }
  return due;
}

void ReportClock::MarkSent(Resource r, double t, double value) {
  const int k = static_cast<int>(r);
  sent_[k] = true;
  last_sent_t_[k] = t;
  last_sent_value_[k] = value;
}

std::optional<std::pair<double, int>> HopArrival(const ContactPlan& plan,
                                                 NodeId from, NodeId to,
                                                 double ready, double bytes) {
  std::span<const int> list = plan.PairWindows(from, to);
  const auto& windows = plan.windows();
  auto it = std::lower_bound(list.begin(), list.end(), ready,
                             [&](int w, double v) { return windows[w].end <= v; });
  for (; it != list.end(); ++it) {
    const std::optional<double> arr = ArrivalVia(plan, windows[*it], ready, bytes);
    if (arr) return std::make_pair(*arr, *it);
  }
  return std::nullopt;
}

ReportRoute PlanReportRoute(NodeId node, double t, AwarenessMode mode,
                            const ContactPlan& plan,
                            const std::unordered_map<NodeId, NodeId>& anchor_of,
                            int size_bytes, const RouteOptions& options) {
  const double bytes = size_bytes;
  ReportRoute best;
  best.t_send = t;
  best.t_deliver = kInf;

  auto consider_direct = [&]() {
    const Leg g = EarliestGroundArrival(plan, node, t, bytes);
    if (g.arrival < best.t_deliver) {
      best.t_deliver = g.arrival;
      best.hops = {node, g.station};
      best.windows = {g.window};
    }
  };
  auto consider_relay = [&](NodeId relay, double arrival, int window) {
    if (arrival >= best.t_deliver) return;
    const Leg g = EarliestGroundArrival(plan, relay, arrival, bytes);
    if (g.arrival < best.t_deliver) {
      best.t_deliver = g.arrival;
      best.hops = {node, relay, g.station};
      best.windows = {window, g.window};
    }
  };

  if (mode == AwarenessMode::kYuheng) {
    const bool is_anchor = IsAnchorRegime(plan.RegimeOf(node));
    if (!is_anchor) {
      // Domain anchor first so that it wins ties.
      auto a = anchor_of.find(node);
      if (a != anchor_of.end() && a->second != node &&
          !plan.IsStation(a->second)) {
        const auto hop = HopArrival(plan, node, a->second, t, bytes);
        if (hop) consider_relay(a->second, hop->first, hop->second);
      } else if (a != anchor_of.end() && plan.IsStation(a->second)) {
        const auto hop = HopArrival(plan, node, a->second, t, bytes);
        if (hop && hop->first < best.t_deliver) {
          best.t_deliver = hop->first;
          best.hops = {node, a->second};
          best.windows = {hop->second};
        }
      }
    }
    consider_direct();
    for (const auto& [other, w] : OpenNeighbours(plan, node, t)) {
      if (!IsAnchorRegime(plan.RegimeOf(other))) continue;
      const auto arr = ArrivalVia(plan, plan.windows()[w], t, bytes);
      if (arr) consider_relay(other, *arr, w);
    }
  } else {
    consider_direct();
    if (options.baseline_isl_relay) {
      for (const auto& [other, w] : OpenNeighbours(plan, node, t)) {
        const auto arr = ArrivalVia(plan, plan.windows()[w], t, bytes);
        if (arr) consider_relay(other, *arr, w);
      }
    }
  }

  if (best.t_deliver == kInf) {
    best.dropped = true;
    best.t_deliver = 0.0;
    best.hops = {node};
    best.windows.clear();
  }
  return best;
}

bool LinkByteLedger::TryCharge(const ContactWindow& w, int window, double bytes) {
  const double cap = w.capacity_bps / 8.0 * (w.end - w.start);
  double& used = bytes_[window];
  if (used + bytes > cap) return false;
  used += bytes;
  return true;
}

double LinkByteLedger::Charged(int window) const {
  auto it = bytes_.find(window);
  return it == bytes_.end() ? 0.0 : it->second;
}

void ResourceView::Merge(const ResourceReport& report, double receipt_time) {
  if (receipt_time < report.generation_time) {
    throw ValidationError(fmt::format(
        "report from node {} received at {} before generation at {}",
        report.node_id, receipt_time, report.generation_time));
  }
  if (report.node_id < 0) throw ValidationError("report without node id");
  if (static_cast<size_t>(report.node_id) >= nodes_.size()) {
    nodes_.resize(report.node_id + 1);
  }
  auto& slots = nodes_[report.node_id];
  for (const ReportEntry& e : report.entries) {
    Entry& s = slots[static_cast<int>(e.resource)];
    if (s.present && e.state_ts <= s.state_ts) continue;
    s = {true, e.value, e.state_ts, receipt_time};
  }
}

const ResourceView::Entry& ResourceView::Get(NodeId id, Resource r) const {
  static const Entry kMissing;
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) return kMissing;
  return nodes_[id][static_cast<int>(r)];
}

bool ResourceView::HasNode(NodeId id) const { return NodeStateTs(id).has_value(); }

std::optional<double> ResourceView::NodeStateTs(NodeId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) return std::nullopt;
  std::optional<double> ts;
  for (const Entry& e : nodes_[id]) {
    if (e.present && (!ts || e.state_ts > *ts)) ts = e.state_ts;
  }
  return ts;
}

bool ResourceView::operator==(const ResourceView& o) const {
  const size_t n = std::max(nodes_.size(), o.nodes_.size());
  for (size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kNumResources; ++k) {
      const Entry& a = Get(static_cast<NodeId>(i), static_cast<Resource>(k));
      const Entry& b = o.Get(static_cast<NodeId>(i), static_cast<Resource>(k));
      if (a.present != b.present) return false;
      if (a.present && (a.value != b.value || a.state_ts != b.state_ts ||
                        a.receipt != b.receipt)) {
        return false;
      }
    }
  }
  return true;
}

Staleness ViewStaleness(const ResourceView& view, std::span<const NodeId> nodes,
                        double t, double scenario_start) {
  Staleness s;
  s.per_node.reserve(nodes.size());
  double sum = 0.0;
  for (NodeId id : nodes) {
    const std::optional<double> ts = view.NodeStateTs(id);
    const double d = t - (ts ? *ts : scenario_start);
    s.per_node.push_back(d);
    sum += d;
  }
  s.mean = nodes.empty() ? 0.0 : sum / static_cast<double>(nodes.size());
  return s;
}

void WriteAwarenessLogCsv(std::ostream& out,
                          std::span<const AwarenessRecord> records) {
  out << "t_send,node_id,mode,route_hops,t_deliver,dropped\n";
  for (const AwarenessRecord& r : records) {
    std::string hops;
    for (size_t i = 0; i < r.hops.size(); ++i) {
      if (i) hops += ';';
      hops += std::to_string(r.hops[i]);
    }
    out << fmt::format("{},{},{},{},{},{}\n", FormatDouble(r.t_send), r.node_id,
                       ToString(r.mode), hops,
                       r.dropped ? std::string() : FormatDouble(r.t_deliver),
                       r.dropped ? 1 : 0);
  }
}

}  // namespace cnsc
