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

#include "cnsc/cluster.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cnsc/util.h"

namespace cnsc {

namespace {

// Absolute slack for floating-point bound checks.
constexpr double kBoundSlack = 1e-9;

}  // namespace

void CapabilityDescriptor::Validate() const {
  if (compute_gbps < 0.0 || storage_gb < 0.0) {
    throw ValidationError(fmt::format(
        "node {}: capabilities must be >= 0 (compute={}, storage={})", node_id,
        compute_gbps, storage_gb));
  }
}

std::string_view ToString(Lifecycle state) {
  switch (state) {
    case Lifecycle::kRegistering:
      return "registering";
    case Lifecycle::kActive:
      return "active";
    case Lifecycle::kDegraded:
      return "degraded";
    case Lifecycle::kDeparted:
      return "departed";
  }
  return "?";
}

const MembershipRecord& Registry::Register(const CapabilityDescriptor& d,
                                           double t) {
  d.Validate();
  auto it = entries_.find(d.node_id);
  if (it != entries_.end()) {
    if (it->second.descriptor != d) {
      throw ValidationError(fmt::format(
          "node {} already registered with a different capability descriptor",
          d.node_id));
    }
    return it->second.record;
  }
  Entry entry{d, MembershipRecord{d.node_id, Lifecycle::kRegistering, t}};
  return entries_.emplace(d.node_id, std::move(entry)).first->second.record;
}

void Registry::Transition(NodeId id, Lifecycle to, double t) {
  Entry& e = At(id);
  const Lifecycle from = e.record.state;
  bool ok = false;
  switch (from) {
    case Lifecycle::kRegistering:
      ok = to == Lifecycle::kActive;
      break;
    case Lifecycle::kActive:
      ok = to == Lifecycle::kDegraded || to == Lifecycle::kDeparted;
      break;
    case Lifecycle::kDegraded:
      ok = to == Lifecycle::kActive || to == Lifecycle::kDeparted;
      break;
    case Lifecycle::kDeparted:
      ok = false;
      break;
  }
  if (!ok) {
    throw StateError(fmt::format("node {}: illegal lifecycle transition {} -> {}",
                                 id, ToString(from), ToString(to)));
  }
  e.record.state = to;
  e.record.last_contact = std::max(e.record.last_contact, t);
}

void Registry::Touch(NodeId id, double t) {
  Entry& e = At(id);
  e.record.last_contact = std::max(e.record.last_contact, t);
}

const CapabilityDescriptor& Registry::Descriptor(NodeId id) const {
  return At(id).descriptor;
}

const MembershipRecord& Registry::Record(NodeId id) const { return At(id).record; }

bool Registry::IsSchedulable(NodeId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) return false;
  const Lifecycle s = it->second.record.state;
  return s == Lifecycle::kActive || s == Lifecycle::kDegraded;
}

std::vector<NodeId> Registry::Ids() const {
  std::vector<NodeId> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) ids.push_back(id);
  return ids;
}

void Registry::WriteCsv(std::ostream& out) const {
  out << "node_id,regime,compute_gbps,storage_gb,link_classes\n";
  for (const auto& [id, entry] : entries_) {
    const CapabilityDescriptor& d = entry.descriptor;
    std::string classes;
    for (size_t i = 0; i < d.link_classes.size(); ++i) {
      if (i) classes += ';';
      classes += ToString(d.link_classes[i]);
    }
    out << fmt::format("{},{},{},{},{}\n", id, ToString(d.regime),
                       FormatDouble(d.compute_gbps), FormatDouble(d.storage_gb),
                       classes);
  }
}

Registry::Entry& Registry::At(NodeId id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw StateError(fmt::format("node {} is not registered", id));
  }
  return it->second;
}

const Registry::Entry& Registry::At(NodeId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw StateError(fmt::format("node {} is not registered", id));
  }
  return it->second;
}

DistributionPolicy ParseDistributionPolicy(std::string_view text) {
  if (text == "uniform") return DistributionPolicy::kUniform;
  if (text == "pareto") return DistributionPolicy::kPareto;
  throw ValidationError("unknown distribution policy '" + std::string(text) +
                        "' (expected uniform|pareto)");
}

std::string_view ToString(DistributionPolicy policy) {
  return policy == DistributionPolicy::kUniform ? "uniform" : "pareto";
}

std::vector<double> DistributeCapacity(double total_gbps, size_t node_count,
                                       DistributionPolicy policy) {
  if (node_count == 0) {
    throw ValidationError("cannot distribute capacity over an empty node list");
  }
  if (!(total_gbps > 0.0)) {
    throw ValidationError("total capacity must be > 0");
  }
  const double n = static_cast<double>(node_count);
  if (policy == DistributionPolicy::kUniform) {
    return std::vector<double>(node_count, total_gbps / n);
  }
  const size_t heavy = std::max<size_t>(1, static_cast<size_t>(std::llround(0.2 * n)));
  if (heavy >= node_count) return std::vector<double>(node_count, total_gbps / n);
  std::vector<double> out(node_count);
  const double heavy_share = 0.8 * total_gbps / static_cast<double>(heavy);
  const double light_share =
      0.2 * total_gbps / static_cast<double>(node_count - heavy);
  for (size_t i = 0; i < node_count; ++i) {
    out[i] = i < heavy ? heavy_share : light_share;
  }
  return out;
}

void GroundTruthState::AddNode(const CapabilityDescriptor& d) {
  d.Validate();
  if (d.node_id < 0) throw ValidationError("node id must be >= 0");
  if (static_cast<size_t>(d.node_id) >= nodes_.size()) {
    nodes_.resize(d.node_id + 1);
  }
  NodeState& n = nodes_[d.node_id];
  n.present = true;
  n.bound = {d.compute_gbps, d.storage_gb, d.HasSensor() ? 1.0 : 0.0};
  n.available = n.bound;
  n.executing.clear();
}

bool GroundTruthState::HasNode(NodeId id) const {
  return id >= 0 && static_cast<size_t>(id) < nodes_.size() && nodes_[id].present;
}

const GroundTruthState::NodeState& GroundTruthState::Node(NodeId id) const {
  if (!HasNode(id)) throw StateError(fmt::format("unknown node {}", id));
  return nodes_[id];
}

GroundTruthState::NodeState& GroundTruthState::Node(NodeId id) {
  if (!HasNode(id)) throw StateError(fmt::format("unknown node {}", id));
  return nodes_[id];
}

double GroundTruthState::Bound(NodeId id, Resource r) const {
  return Node(id).bound[static_cast<int>(r)];
}

double GroundTruthState::Available(NodeId id, Resource r) const {
  return Node(id).available[static_cast<int>(r)];
}

void GroundTruthState::AdvanceTo(double t) {
  if (t < as_of_) {
    throw StateError(fmt::format("ground truth cannot move back in time ({} < {})",
                                 t, as_of_));
  }
  as_of_ = t;
}

void GroundTruthState::ApplyResourceDelta(NodeId id, Resource r, double delta,
                                          double t) {
  NodeState& n = Node(id);
  if (t < as_of_) {
    throw StateError(fmt::format("resource delta at t={} precedes as_of={}", t,
                                 as_of_));
  }
  const int k = static_cast<int>(r);
  const double next = n.available[k] + delta;
  const double bound = n.bound[k];
  const double slack = kBoundSlack * std::max(1.0, bound);
  if (next < -slack) {
    throw ResourceError(fmt::format(
        "node {} {}: consuming {} exceeds available {}", id, ToString(r),
        -delta, n.available[k]));
  }
  if (next > bound + slack) {
    throw ResourceError(fmt::format(
        "node {} {}: releasing {} exceeds bound {} (available {})", id,
        ToString(r), delta, bound, n.available[k]));
  }
  n.available[k] = std::clamp(next, 0.0, bound);
  as_of_ = t;
}

double GroundTruthState::LinkResidual(int window, double capacity_bps) const {
  auto it = link_used_.find(window);
  return capacity_bps - (it == link_used_.end() ? 0.0 : it->second);
}

void GroundTruthState::ApplyLinkDelta(int window, double capacity_bps,
                                      double delta, double t) {
  if (t < as_of_) {
    throw StateError(fmt::format("link delta at t={} precedes as_of={}", t, as_of_));
  }
  double& used = link_used_[window];
  const double next = used - delta;
  const double slack = kBoundSlack * std::max(1.0, capacity_bps);
  if (next < -slack || next > capacity_bps + slack) {
    throw ResourceError(fmt::format(
        "window {}: residual change {} leaves usage {} outside [0, {}]", window,
        delta, next, capacity_bps));
  }
  used = std::clamp(next, 0.0, capacity_bps);
  as_of_ = t;
}

void GroundTruthState::AddExecuting(NodeId id, TaskId task, StageId stage) {
  if (!Node(id).executing.insert({task, stage}).second) {
    throw StateError(fmt::format("task {} stage {} already executing on node {}",
                                 task, stage, id));
  }
}

void GroundTruthState::RemoveExecuting(NodeId id, TaskId task, StageId stage) {
  Node(id).executing.erase({task, stage});
}

const std::set<std::pair<TaskId, StageId>>& GroundTruthState::Executing(
    NodeId id) const {
  return Node(id).executing;
}

}  // namespace cnsc
