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

// Evaluation metrics and their CSV forms.

#ifndef CNSC_METRICS_H_
#define CNSC_METRICS_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cnsc/scheduler.h"
#include "cnsc/types.h"

namespace cnsc {

struct TaskRecord {
  TaskId task_id = 0;
  int priority = 1;
  double arrival = 0.0;
  double deadline = 0.0;
  bool completed = false;
  FailureReason fail_reason = FailureReason::kNone;  // set iff failed
  double finish = 0.0;  // completion or failure time

  bool Terminal() const { return completed || fail_reason != FailureReason::kNone; }
};

// One staleness sample: the summed per-node delay over `nodes` nodes.
struct StalenessSample {
  double t = 0.0;
  int nodes = 0;
  double sum_s = 0.0;
};

// Sum of priorities of completed tasks over the sum for all tasks; 1.0 for
// an empty workload. Throws StateError if a record is not terminal.
double WeightedCompletionRatio(std::span<const TaskRecord> tasks);

// Mean over every (sample, node) pair. Throws ValidationError without
// samples.
double MeanAwarenessDelay(std::span<const StalenessSample> samples);

// Stale-view failures over all failures; 0 without failures.
double AwarenessFailureRatio(std::span<const TaskRecord> tasks);

struct MetricsReport {
  double weighted_completion_ratio = 1.0;
  double mean_awareness_delay_s = 0.0;
  double awareness_failure_ratio = 0.0;
  int total = 0;
  int completed = 0;
  int failed = 0;
  std::array<int, kNumFailureReasons> failed_by_reason{};  // indexed by FailureReason
  std::array<int, 4> total_by_priority{};
  std::array<int, 4> completed_by_priority{};
};

MetricsReport ComputeMetrics(std::span<const TaskRecord> tasks,
                             std::span<const StalenessSample> samples);

struct MetricsRow {
  int network_size = 0;
  int task_count = 0;
  AwarenessMode mode = AwarenessMode::kYuheng;
  uint64_t seed = 0;
  double wcr = 0.0;
  double mean_delay_s = 0.0;
  double afr = 0.0;
  int completed = 0;
  int failed_stale = 0;
  int failed_other = 0;

  bool operator==(const MetricsRow&) const = default;
};

MetricsRow MakeMetricsRow(const MetricsReport& report, int network_size, int task_count,
                          AwarenessMode mode, uint64_t seed);

// Sorts by (mode, network_size, task_count, seed).
void SortMetricsRows(std::vector<MetricsRow>& rows);

// network_size,task_count,mode,seed,wcr,mean_delay_s,afr,completed,
// failed_stale,failed_other; rows are written sorted.
void WriteMetricsCsv(std::ostream& out, std::span<const MetricsRow> rows);
std::vector<MetricsRow> ReadMetricsCsv(std::istream& in);

// Human-readable means per (mode, size, tasks) cell and per mode.
void WriteSummary(std::ostream& out, std::span<const MetricsRow> rows);

// task_id,priority,arrival_s,deadline_s,status,fail_reason,finish_s
void WriteTaskRecordsCsv(std::ostream& out, std::span<const TaskRecord> tasks);
std::vector<TaskRecord> ReadTaskRecordsCsv(std::istream& in);

// t,nodes,sum_s,mean_s
void WriteStalenessCsv(std::ostream& out, std::span<const StalenessSample> samples);
std::vector<StalenessSample> ReadStalenessCsv(std::istream& in);

}  // namespace cnsc

#endif  // CNSC_METRICS_H_
