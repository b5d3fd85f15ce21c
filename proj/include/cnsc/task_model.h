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

// Tasks as stage DAGs, the quality -> demand knowledge base and workload
// generation.

#ifndef CNSC_TASK_MODEL_H_
#define CNSC_TASK_MODEL_H_

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnsc/types.h"

namespace cnsc {

enum class StageKind : uint8_t {
  kSensing,
  kProcessing,
  kTransmission,
  kFusion,
  kDistribution
};
std::string_view ToString(StageKind kind);
StageKind ParseStageKind(std::string_view text);

inline bool IsComputeStage(StageKind k) {
  return k == StageKind::kProcessing || k == StageKind::kFusion;
}
inline bool IsTransferStage(StageKind k) {
  return k == StageKind::kTransmission || k == StageKind::kDistribution;
}

// Volumes are in GB. Placement affinity follows from the kind: sensing needs
// a sensor node inside a target access window, compute stages run where
// their input lives, transmission moves data to another satellite and
// distribution moves it to the ground.
struct StageSpec {
  StageId stage_id = 0;
  StageKind kind = StageKind::kProcessing;
  double input_gb = 0.0;
  double output_gb = 0.0;
  double compute_gb = 0.0;
  double transfer_gb = 0.0;
  double sensing_duration_s = 0.0;  // sensing only
};

struct TaskSpec {
  TaskId task_id = 0;
  std::string type;
  int priority = 1;  // 1..3 regular, 4 emergency
  double arrival = 0.0;
  double deadline = 0.0;
  double quality = 1.0;
  int target = -1;  // sensing target index, -1 if the task senses nothing
  std::vector<StageSpec> stages;
  std::vector<std::pair<StageId, StageId>> edges;  // (from, to)

  bool IsEmergency() const { return priority == 4; }
  // Throws ValidationError on a cyclic DAG, bad priority, deadline <=
  // arrival, negative volumes or kind/demand mismatches.
  void Validate() const;
  // Stage indices in a deterministic topological order (Kahn, lowest id
  // first). Throws ValidationError on cycles.
  std::vector<StageId> TopologicalOrder() const;
  std::vector<StageId> Predecessors(StageId stage) const;
  const StageSpec& Stage(StageId id) const;
};

struct CurvePoint {
  double quality = 0.0;
  std::vector<double> factors;  // one per stage
  double perf_mean = 0.0;
  double perf_spread = 0.0;
};

// Piecewise-linear quality -> per-stage demand factor mapping.
struct DemandCurve {
  std::vector<CurvePoint> points;

  // Quality levels strictly increasing in [0, 1]; factors non-decreasing in
  // quality and > 0; every point has `stages` factors.
  void Validate(size_t stages) const;
  // Interpolated factors; exact at points, clamped beyond the end points.
  std::vector<double> Factors(double quality) const;
};

struct StageDemand {
  double compute_gb = 0.0;
  double transfer_gb = 0.0;
  double output_gb = 0.0;
  double duration_s = 0.0;  // fixed duration (sensing); not scaled
};

struct Feedback {
  std::string task_type;
  int stage = 0;
  double quality = 0.0;
  double realized_factor = 0.0;  // realized consumption / base demand
};

class KnowledgeBase {
 public:
  struct Entry {
    std::vector<StageKind> stages;
    std::vector<StageDemand> base;  // demands at factor 1
    DemandCurve curve;
    std::vector<int64_t> samples;  // per stage
  };

  // The default knowledge base: one "fusion" type.
  static KnowledgeBase Default();

  void Put(std::string type, Entry entry);
  bool Has(std::string_view type) const;
  const Entry& Get(std::string_view type) const;
  const std::map<std::string, Entry, std::less<>>& entries() const {
    return entries_;
  }

  // Absolute per-stage demands at `quality`. Throws ValidationError for an
  // unknown type or quality outside [0, 1].
  std::vector<StageDemand> QueryDemands(std::string_view type,
                                        double quality) const;

  // EWMA update (weight alpha) of the curve point nearest to each
  // feedback's quality (lower point on ties), followed by an isotonic pass
  // per stage so factors stay non-decreasing. Unknown types throw.
  void Calibrate(std::span<const Feedback> feedback, double alpha = 0.2);

  void Write(std::ostream& out) const;
  static KnowledgeBase Read(std::istream& in);
  bool operator==(const KnowledgeBase&) const;

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

// Least-squares non-decreasing fit (pool adjacent violators), equal weights.
std::vector<double> IsotonicNonDecreasing(std::span<const double> values);

struct FusionParams {
  double raw_gb = 5.0;
  double preprocessed_gb = 0.5;
  double product_gb = 0.02;
  double sensing_duration_s = 30.0;
  int fusion_streams = 2;
  // Compute work (GB) per GB of stage input.
  double processing_intensity = 1.0;
  double fusion_intensity = 1.0;
};

// Five-stage chain: sensing -> processing -> transmission -> fusion ->
// distribution, with volumes at factor 1 from `params`, scaled per stage by
// the knowledge base curve at `quality`.
TaskSpec BuildFusionTask(TaskId id, int priority, double arrival, double deadline,
                         double quality, const KnowledgeBase& kb, int target = 0);

// Knowledge base entry matching BuildFusionTask's volumes.
KnowledgeBase::Entry FusionEntry(const FusionParams& params = {});

struct WorkloadParams {
  int count = 0;
  std::array<double, 4> priority_mix = {0.3, 0.3, 0.3, 0.1};  // priorities 1..4
  double arrival_start = 0.0;
  double arrival_end = 3600.0;
  double regular_deadline_s = 3600.0;
  double emergency_deadline_s = 600.0;
  double quality_min = 0.5;
  double quality_max = 1.0;
  int target_count = 1;
  uint64_t seed = 1;

  void Validate() const;
};

// Seeded workload of fusion tasks sorted by arrival; ids are assigned in
// arrival order.
std::vector<TaskSpec> GenerateWorkload(const WorkloadParams& params,
                                       const KnowledgeBase& kb);

// task_id,type,priority,arrival_s,deadline_s,quality
void WriteWorkloadCsv(std::ostream& out, std::span<const TaskSpec> tasks);

}  // namespace cnsc

#endif  // CNSC_TASK_MODEL_H_
