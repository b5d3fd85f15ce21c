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

// Awareness planes: domain partitioning, adaptive report policies, report
// routing over the contact plan and the operations-centre resource view.

#ifndef CNSC_AWARENESS_H_
#define CNSC_AWARENESS_H_

#include <array>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnsc/orbital.h"
#include "cnsc/types.h"

namespace cnsc {

struct AwarenessDomain {
  NodeId anchor = kNoNode;
  std::vector<NodeId> members;  // ascending, includes the anchor itself
};

// A node id with a position, used by the geometry-only partition overload.
struct PlacedNode {
  NodeId id = kNoNode;
  Vec3 position;
};

// Assigns every node to its nearest anchor (slant distance), ties to the
// lowest anchor id. Anchors are assigned to themselves. Domains come back
// sorted by anchor id; anchors without members still get a domain.
std::vector<AwarenessDomain> PartitionDomains(std::span<const PlacedNode> nodes,
                                              std::span<const PlacedNode> anchors);
std::vector<AwarenessDomain> PartitionDomains(const ContactPlan& plan,
                                              std::span<const NodeId> nodes,
                                              std::span<const NodeId> anchors,
                                              double t);

// Flattened node -> anchor map for quick lookup.
std::unordered_map<NodeId, NodeId> AnchorOf(
    std::span<const AwarenessDomain> domains);

enum class Volatility : uint8_t { kRapid, kModerate, kStable };
std::string_view ToString(Volatility v);
Volatility ParseVolatility(std::string_view text);

struct VolatilityThresholds {
  double rapid_per_s = 0.01;
  double moderate_per_s = 0.001;
};

// v = mean over consecutive samples of (|dvalue| / capacity) / dt. A single
// sample (or zero capacity) is stable. `times` must be strictly increasing.
double NormalizedVariationRate(std::span<const double> times,
                               std::span<const double> values, double capacity);
Volatility ClassifyVolatility(std::span<const double> times,
                              std::span<const double> values, double capacity,
                              const VolatilityThresholds& thresholds = {});

// kPeriodicOrEvent emits at the interval and also as soon as the value
// moves by the threshold.
enum class ReportMode : uint8_t { kPeriodic, kEventDriven, kPeriodicOrEvent };

struct ClassPolicy {
  ReportMode mode = ReportMode::kPeriodic;
  double interval_s = 10.0;
  double event_threshold = 0.1;  // relative change of capacity
};

struct ReportingPolicy {
  // Indexed by Volatility.
  std::array<ClassPolicy, 3> by_class = {
      ClassPolicy{ReportMode::kPeriodic, 10.0, 0.1},
      ClassPolicy{ReportMode::kPeriodicOrEvent, 60.0, 0.1},
      ClassPolicy{ReportMode::kPeriodicOrEvent, 300.0, 0.1}};

  // Intervals strictly increase rapid < moderate < stable; thresholds lie
  // in (0, 1]. Throws ValidationError otherwise.
  void Validate() const;
  const ClassPolicy& For(Volatility v) const {
    return by_class[static_cast<int>(v)];
  }
};

// The periodic interval of the class, or nullopt for event-driven classes.
std::optional<double> ReportingInterval(Volatility v,
                                        const ReportingPolicy& policy);

struct ReportEntry {
  Resource resource = Resource::kCompute;
  double value = 0.0;
  double state_ts = 0.0;
};

struct ResourceReport {
  NodeId node_id = kNoNode;
  double generation_time = 0.0;
  std::vector<ReportEntry> entries;

  int SizeBytes() const;
};

inline constexpr int kReportHeaderBytes = 256;
inline constexpr int kReportEntryBytes = 64;
inline int ReportSizeBytes(int entries) {
  return kReportHeaderBytes + kReportEntryBytes * entries;
}

// Per-node reporting state: decides which resources a node publishes at a
// monitoring tick.
class ReportClock {
 public:
  ReportClock() = default;
  // `capacities` are the node's bounds per resource, used to normalise
  // event thresholds.
  explicit ReportClock(std::array<double, kNumResources> capacities);

  // Resources due at time t given current values and classes. Periodic
  // classes are due when at least the interval has passed since the last
  // emission of that resource (or it was never sent); event-driven classes
  // when the relative change since the last emitted value reaches the
  // threshold; periodic-or-event classes on either. Does not modify state.
  std::vector<Resource> Due(double t,
                            const std::array<double, kNumResources>& values,
                            const std::array<Volatility, kNumResources>& classes,
                            const ReportingPolicy& policy) const;
  void MarkSent(Resource r, double t, double value);

 private:
  std::array<double, kNumResources> capacity_{};
  std::array<double, kNumResources> last_sent_t_{};
  std::array<double, kNumResources> last_sent_value_{};
  std::array<bool, kNumResources> sent_{};
};

struct RouteOptions {
  // Baseline only: also try a single ISL hop to a neighbour that reaches the
  // ground.
  bool baseline_isl_relay = false;
};

struct ReportRoute {
  std::vector<NodeId> hops;  // node, relays..., ground station
  std::vector<int> windows;  // one contact-window index per hop
  double t_send = 0.0;
  double t_deliver = 0.0;
  bool dropped = false;
};

// Earliest arrival of `bytes` sent from `from` to `to` no earlier than
// `ready`, using the first window of the pair that fits the whole
// transmission. Returns (arrival, window index).
std::optional<std::pair<double, int>> HopArrival(const ContactPlan& plan,
                                                 NodeId from, NodeId to,
                                                 double ready, double bytes);

// Routes one report. Yuheng: node -> domain anchor (or another open anchor)
// -> ground, or direct to ground if that is earlier; anchors go straight to
// ground. Baseline: node -> ground only, waiting for the next window
// (optionally via one ISL neighbour). `anchor_of` maps a node to its domain
// anchor. Per hop the delay is bytes*8/capacity + distance/c plus waits.
ReportRoute PlanReportRoute(NodeId node, double t, AwarenessMode mode,
                            const ContactPlan& plan,
                            const std::unordered_map<NodeId, NodeId>& anchor_of,
                            int size_bytes, const RouteOptions& options = {});

// Bytes carried per contact window; charges beyond capacity x duration are
// refused.
class LinkByteLedger {
 public:
  bool TryCharge(const ContactWindow& w, int window, double bytes);
  double Charged(int window) const;
  const std::unordered_map<int, double>& all() const { return bytes_; }

 private:
  std::unordered_map<int, double> bytes_;
};

// The operations centre's picture of the cluster.
class ResourceView {
 public:
  struct Entry {
    bool present = false;
    double value = 0.0;
    double state_ts = 0.0;
    double receipt = 0.0;
  };

  // Each entry is replaced only if the incoming state timestamp is strictly
  // newer. Throws ValidationError if receipt < generation time.
  void Merge(const ResourceReport& report, double receipt_time);

  const Entry& Get(NodeId id, Resource r) const;
  bool HasNode(NodeId id) const;
  // Newest state timestamp across the node's entries, if any.
  std::optional<double> NodeStateTs(NodeId id) const;
  bool operator==(const ResourceView& o) const;

 private:
  std::vector<std::array<Entry, kNumResources>> nodes_;
};

struct Staleness {
  std::vector<double> per_node;  // aligned with the queried ids
  double mean = 0.0;
};

// Delay per node = t - newest state timestamp (t - scenario_start if the
// node never reported).
Staleness ViewStaleness(const ResourceView& view, std::span<const NodeId> nodes,
                        double t, double scenario_start = 0.0);

struct AwarenessRecord {
  double t_send = 0.0;
  NodeId node_id = kNoNode;
  AwarenessMode mode = AwarenessMode::kYuheng;
  std::vector<NodeId> hops;
  double t_deliver = 0.0;
  bool dropped = false;
};

// t_send,node_id,mode,route_hops,t_deliver,dropped. route_hops lists node
// ids joined by ';'; t_deliver is empty for dropped reports.
void WriteAwarenessLogCsv(std::ostream& out,
                          std::span<const AwarenessRecord> records);

}  // namespace cnsc

#endif  // CNSC_AWARENESS_H_
