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


#include "cnsc/metrics.h"

#include <random>
#include <sstream>

#include "gtest/gtest.h"

namespace cnsc {
namespace {

TaskRecord Done(TaskId id, int prio) {
  TaskRecord t;
  t.task_id = id;
  t.priority = prio;
  t.completed = true;
  return t;
}

TaskRecord Failed(TaskId id, int prio, FailureReason r) {
  TaskRecord t;
  t.task_id = id;
  t.priority = prio;
  t.fail_reason = r;
  return t;
}

TEST(Wcr, EmptyIsOne) { EXPECT_DOUBLE_EQ(WeightedCompletionRatio({}), 1.0); }

TEST(Wcr, AllCompleted) {
  std::vector<TaskRecord> v = {Done(0, 1), Done(1, 4)};
  EXPECT_DOUBLE_EQ(WeightedCompletionRatio(v), 1.0);
}

TEST(Wcr, OnlyEmergencyCompleted) {
  std::vector<TaskRecord> v = {Failed(0, 1, FailureReason::kNoWindow),
                               Failed(1, 2, FailureReason::kPreempted),
                               Failed(2, 3, FailureReason::kDeadlineInfeasible), Done(3, 4)};
  EXPECT_DOUBLE_EQ(WeightedCompletionRatio(v), 0.4);
}

TEST(Wcr, NonTerminalThrows) {
  TaskRecord open;
  std::vector<TaskRecord> v = {open};
  EXPECT_THROW(WeightedCompletionRatio(v), StateError);
}

TEST(Wcr, RandomMatchesSummation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TaskRecord> v;
    double num = 0.0;
    double den = 0.0;
    const int n = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < n; ++i) {
      const int p = 1 + static_cast<int>(rng() % 4);
      const bool ok = rng() % 2 == 0;
      v.push_back(ok ? Done(i, p) : Failed(i, p, FailureReason::kNoWindow));
      den += p;
      if (ok) num += p;
    }
    EXPECT_DOUBLE_EQ(WeightedCompletionRatio(v), num / den);
  }
}

TEST(Delay, FreshIsZero) {
  std::vector<StalenessSample> s = {{0.0, 5, 0.0}, {10.0, 5, 0.0}};
  EXPECT_DOUBLE_EQ(MeanAwarenessDelay(s), 0.0);
}

TEST(Delay, TwoSamples) {
  std::vector<StalenessSample> s = {{10.0, 1, 10.0}, {20.0, 1, 20.0}};
  EXPECT_DOUBLE_EQ(MeanAwarenessDelay(s), 15.0);
}

TEST(Delay, NoSamplesThrows) { EXPECT_THROW(MeanAwarenessDelay({}), ValidationError); }

TEST(Afr, NoFailuresIsZero) {
  std::vector<TaskRecord> v = {Done(0, 1)};
  EXPECT_DOUBLE_EQ(AwarenessFailureRatio(v), 0.0);
}

TEST(Afr, EightyTwoOfHundred) {
  std::vector<TaskRecord> v;
  for (int i = 0; i < 100; ++i) {
    v.push_back(Failed(i, 1,
                       i < 82 ? FailureReason::kStaleViewConflict
                              : FailureReason::kDeadlineInfeasible));
  }
  v.push_back(Done(100, 2));
  EXPECT_DOUBLE_EQ(AwarenessFailureRatio(v), 0.82);
}

TEST(Afr, RandomMatchesRecount) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TaskRecord> v;
    int failed = 0;
    int stale = 0;
    for (int i = 0; i < 40; ++i) {
      const int r = static_cast<int>(rng() % kNumFailureReasons);
      if (r == 0) {
        v.push_back(Done(i, 1));
        continue;
      }
      v.push_back(Failed(i, 1, static_cast<FailureReason>(r)));
      ++failed;
      stale += r == static_cast<int>(FailureReason::kStaleViewConflict);
    }
    EXPECT_DOUBLE_EQ(AwarenessFailureRatio(v),
                     failed == 0 ? 0.0 : static_cast<double>(stale) / failed);
  }
}

TEST(Report, PartitionsFailures) {
  std::vector<TaskRecord> v = {Done(0, 1), Failed(1, 2, FailureReason::kStaleViewConflict),
                               Failed(2, 3, FailureReason::kNoWindow)};
  const MetricsReport r = ComputeMetrics(v, {});
  EXPECT_EQ(r.completed + r.failed, r.total);
  int sum = 0;
  for (int c : r.failed_by_reason) sum += c;
  EXPECT_EQ(sum, r.failed);
  const MetricsRow row = MakeMetricsRow(r, 60, 3, AwarenessMode::kBaseline, 1);
  EXPECT_EQ(row.failed_stale, 1);
  EXPECT_EQ(row.failed_other, 1);
}

TEST(MetricsCsv, SingleRowAndRoundTrip) {
  MetricsRow r{600, 400, AwarenessMode::kYuheng, 3, 0.123456789, 4.5, 0.1, 10, 2, 3};
  std::vector<MetricsRow> rows = {r};
  std::stringstream ss;
  WriteMetricsCsv(ss, rows);
  const std::string text = ss.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(ReadMetricsCsv(ss), rows);
}

TEST(MetricsCsv, SweepSortedByModeSizeTasks) {
  std::vector<MetricsRow> rows;
  std::mt19937_64 rng(2);
  for (AwarenessMode m : {AwarenessMode::kYuheng, AwarenessMode::kBaseline}) {
    for (int size : {600, 60}) {
      for (int tasks : {400, 50, 100}) {
        rows.push_back({size, tasks, m, rng() % 10, 0.5, 1.0, 0.0, 1, 0, 0});
      }
    }
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  std::stringstream ss;
  WriteMetricsCsv(ss, rows);
  const std::vector<MetricsRow> back = ReadMetricsCsv(ss);
  ASSERT_EQ(back.size(), 12u);
  for (size_t i = 1; i < back.size(); ++i) {
    const auto key = [](const MetricsRow& r) {
      return std::make_tuple(std::string(ToString(r.mode)), r.network_size, r.task_count);
    };
    EXPECT_LE(key(back[i - 1]), key(back[i]));
  }
  EXPECT_EQ(back.front().mode, AwarenessMode::kBaseline);
}

TEST(MetricsCsv, BadHeaderRejected) {
  std::stringstream ss("a,b\n");
  EXPECT_THROW(ReadMetricsCsv(ss), ValidationError);
}

TEST(TaskCsv, RoundTrip) {
  std::vector<TaskRecord> v = {Done(0, 1), Failed(1, 4, FailureReason::kPreempted)};
  v[0].finish = 12.5;
  std::stringstream ss;
  WriteTaskRecordsCsv(ss, v);
  const std::vector<TaskRecord> back = ReadTaskRecordsCsv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].completed);
  EXPECT_DOUBLE_EQ(back[0].finish, 12.5);
  EXPECT_EQ(back[1].fail_reason, FailureReason::kPreempted);
}

TEST(Summary, ListsModes) {
  std::vector<MetricsRow> rows = {{60, 50, AwarenessMode::kYuheng, 1, 0.9, 3, 0.1, 1, 0, 0},
                                  {60, 50, AwarenessMode::kBaseline, 1, 0.5, 40, 0.8, 1, 0, 0}};
  std::stringstream ss;
  WriteSummary(ss, rows);
  EXPECT_NE(ss.str().find("yuheng"), std::string::npos);
  EXPECT_NE(ss.str().find("baseline"), std::string::npos);
}

}  // namespace
}  // namespace cnsc
