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

// Cluster membership, the capability registry and the ground-truth resource
// state of every node.

#ifndef CNSC_CLUSTER_H_
#define CNSC_CLUSTER_H_

#include <array>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnsc/types.h"

namespace cnsc {

// Configured capacity bounds of a node. Static while the node is a member.
struct CapabilityDescriptor {
  NodeId node_id = kNoNode;
  Regime regime = Regime::kLeo;
  double compute_gbps = 0.0;  // GB of data processed per second
  double storage_gb = 0.0;
  std::vector<LinkClass> link_classes;
  std::vector<std::string> sensor_types;

  void Validate() const;
  bool HasSensor() const { return !sensor_types.empty(); }
  bool operator==(const CapabilityDescriptor&) const = default;
};

enum class Lifecycle : uint8_t { kRegistering, kActive, kDegraded, kDeparted };
std::string_view ToString(Lifecycle state);

struct MembershipRecord {
  NodeId node_id = kNoNode;
  Lifecycle state = Lifecycle::kRegistering;
  double last_contact = 0.0;
  bool operator==(const MembershipRecord&) const = default;
};

// Membership manager plus capability registry.
class Registry {
 public:
  // Idempotent for an identical descriptor; a conflicting descriptor for an
  // existing id throws ValidationError.
  const MembershipRecord& Register(const CapabilityDescriptor& descriptor,
                                   double t = 0.0);

  // Legal moves: registering->active, active<->degraded,
  // {active,degraded}->departed. Anything else throws StateError.
  void Transition(NodeId id, Lifecycle to, double t);
  void Activate(NodeId id, double t) { Transition(id, Lifecycle::kActive, t); }
  void Depart(NodeId id, double t) { Transition(id, Lifecycle::kDeparted, t); }

  // Records a successful contact (e.g. a delivered report).
  void Touch(NodeId id, double t);

  bool Contains(NodeId id) const { return entries_.count(id) > 0; }
  const CapabilityDescriptor& Descriptor(NodeId id) const;
  const MembershipRecord& Record(NodeId id) const;
  // Active and degraded nodes accept work; registering and departed do not.
  bool IsSchedulable(NodeId id) const;

  size_t size() const { return entries_.size(); }
  std::vector<NodeId> Ids() const;

  // node_id,regime,compute_gbps,storage_gb,link_classes
  void WriteCsv(std::ostream& out) const;

 private:
  struct Entry {
    CapabilityDescriptor descriptor;
    MembershipRecord record;
  };
  std::map<NodeId, Entry> entries_;

  Entry& At(NodeId id);
  const Entry& At(NodeId id) const;
};

enum class DistributionPolicy { kUniform, kPareto };
DistributionPolicy ParseDistributionPolicy(std::string_view text);
std::string_view ToString(DistributionPolicy policy);

// Splits `total_gbps` across `node_count` nodes. Uniform gives total/N each;
// pareto gives 80% of the total to the first 20% of nodes (at least one).
std::vector<double> DistributeCapacity(double total_gbps, size_t node_count,
                                       DistributionPolicy policy);

// Actual on-board state. Available amounts live in [0, bound]; the reserved
// amount of a resource is bound - available.
class GroundTruthState {
 public:
  void AddNode(const CapabilityDescriptor& descriptor);
  bool HasNode(NodeId id) const;

  double Bound(NodeId id, Resource r) const;
  double Available(NodeId id, Resource r) const;
  double Reserved(NodeId id, Resource r) const {
    return Bound(id, r) - Available(id, r);
  }

  // Changes the available amount by `delta` (negative = consume). Throws
  // ResourceError naming node, resource and amounts if the result would
  // leave [0, bound]; the state is unchanged on error. Throws StateError if
  // t < as_of().
  void ApplyResourceDelta(NodeId id, Resource r, double delta, double t);
  void Consume(NodeId id, Resource r, double amount, double t) {
    ApplyResourceDelta(id, r, -amount, t);
  }
  void Release(NodeId id, Resource r, double amount, double t) {
    ApplyResourceDelta(id, r, amount, t);
  }

  // Residual link capacity per contact window, initialised lazily.
  double LinkResidual(int window, double capacity_bps) const;
  void ApplyLinkDelta(int window, double capacity_bps, double delta, double t);

  void AddExecuting(NodeId id, TaskId task, StageId stage);
  void RemoveExecuting(NodeId id, TaskId task, StageId stage);
  const std::set<std::pair<TaskId, StageId>>& Executing(NodeId id) const;

  double as_of() const { return as_of_; }
  void AdvanceTo(double t);

 private:
  struct NodeState {
    bool present = false;
    std::array<double, kNumResources> bound{};
    std::array<double, kNumResources> available{};
    std::set<std::pair<TaskId, StageId>> executing;
  };
  std::vector<NodeState> nodes_;
  std::unordered_map<int, double> link_used_;
  double as_of_ = 0.0;

  const NodeState& Node(NodeId id) const;
  NodeState& Node(NodeId id);
};

}  // namespace cnsc

#endif  // CNSC_CLUSTER_H_
