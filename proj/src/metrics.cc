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

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>

#include <fmt/format.h>

#include "cnsc/util.h"

namespace cnsc {

double WeightedCompletionRatio(std::span<const TaskRecord> tasks) {
  if (tasks.empty()) return 1.0;
  int64_t done = 0;
  int64_t all = 0;
  for (const TaskRecord& t : tasks) {
    if (!t.Terminal()) {
      throw StateError(fmt::format("task {} is not terminal", t.task_id));
    }
    all += t.priority;
    if (t.completed) done += t.priority;
  }
  return all == 0 ? 1.0 : static_cast<double>(done) / static_cast<double>(all);
}

double MeanAwarenessDelay(std::span<const StalenessSample> samples) {
  double sum = 0.0;
  int64_t n = 0;
  for (const StalenessSample& s : samples) {
    sum += s.sum_s;
    n += s.nodes;
  }
  if (n == 0) throw ValidationError("no staleness samples");
  return sum / static_cast<double>(n);
}

double AwarenessFailureRatio(std::span<const TaskRecord> tasks) {
  int failed = 0;
  int stale = 0;
  for (const TaskRecord& t : tasks) {
    if (t.completed || t.fail_reason == FailureReason::kNone) continue;
    ++failed;
    if (t.fail_reason == FailureReason::kStaleViewConflict) ++stale;
  }
  return failed == 0 ? 0.0 : static_cast<double>(stale) / failed;
}

MetricsReport ComputeMetrics(std::span<const TaskRecord> tasks,
                             std::span<const StalenessSample> samples) {
  MetricsReport r;
  r.weighted_completion_ratio = WeightedCompletionRatio(tasks);
  r.mean_awareness_delay_s = samples.empty() ? 0.0 : MeanAwarenessDelay(samples);
  r.awareness_failure_ratio = AwarenessFailureRatio(tasks);
  r.total = static_cast<int>(tasks.size());
  for (const TaskRecord& t : tasks) {
    const int p = std::clamp(t.priority, 1, 4) - 1;
    ++r.total_by_priority[p];
    if (t.completed) {
      ++r.completed;
      ++r.completed_by_priority[p];
    } else {
      ++r.failed;
      ++r.failed_by_reason[static_cast<int>(t.fail_reason)];
    }
  }
  return r;
}

MetricsRow MakeMetricsRow(const MetricsReport& report, int network_size, int task_count,
                          AwarenessMode mode, uint64_t seed) {
  MetricsRow row;
  row.network_size = network_size;
  row.task_count = task_count;
  row.mode = mode;
  row.seed = seed;
  row.wcr = report.weighted_completion_ratio;
  row.mean_delay_s = report.mean_awareness_delay_s;
  row.afr = report.awareness_failure_ratio;
  row.completed = report.completed;
  row.failed_stale =
      report.failed_by_reason[static_cast<int>(FailureReason::kStaleViewConflict)];
  row.failed_other = report.failed - row.failed_stale;
  return row;
}

void SortMetricsRows(std::vector<MetricsRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::make_tuple(ToString(a.mode), a.network_size, a.task_count, a.seed) <
           std::make_tuple(ToString(b.mode), b.network_size, b.task_count, b.seed);
  });
}

namespace {

constexpr const char* kMetricsHeader =
    "network_size,task_count,mode,seed,wcr,mean_delay_s,afr,completed,failed_stale,"
    "failed_other";

template <typename T>
T ParseNumber(const std::string& s, int line) {
  try {
    size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(s, &used);
    } else if constexpr (std::is_same_v<T, uint64_t>) {
      v = std::stoull(s, &used);
    } else {
      v = static_cast<T>(std::stoll(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("line {}: bad number '{}'", line, s));
  }
}

std::vector<std::vector<std::string>> ReadRows(std::istream& in, std::string_view header,
                                               size_t columns) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw ValidationError(fmt::format("line 1: unexpected header '{}'", line));
  }
  std::vector<std::vector<std::string>> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f = SplitCsvLine(line);
    if (f.size() != columns) {
      throw ValidationError(
          fmt::format("line {}: expected {} fields, got {}", n, columns, f.size()));
    }
    f.push_back(std::to_string(n));
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace

void WriteMetricsCsv(std::ostream& out, std::span<const MetricsRow> rows) {
  std::vector<MetricsRow> sorted(rows.begin(), rows.end());
  SortMetricsRows(sorted);
  out << kMetricsHeader << '\n';
  for (const MetricsRow& r : sorted) {
    out << r.network_size << ',' << r.task_count << ',' << ToString(r.mode) << ','
        << r.seed << ',' << FormatDouble(r.wcr) << ',' << FormatDouble(r.mean_delay_s)
        << ',' << FormatDouble(r.afr) << ',' << r.completed << ',' << r.failed_stale
        << ',' << r.failed_other << '\n';
  }
}

std::vector<MetricsRow> ReadMetricsCsv(std::istream& in) {
  std::vector<MetricsRow> rows;
  for (const auto& f : ReadRows(in, kMetricsHeader, 10)) {
    const int line = std::stoi(f[10]);
    MetricsRow r;
    r.network_size = ParseNumber<int>(f[0], line);
    r.task_count = ParseNumber<int>(f[1], line);
    r.mode = ParseAwarenessMode(f[2]);
    r.seed = ParseNumber<uint64_t>(f[3], line);
    r.wcr = ParseNumber<double>(f[4], line);
    r.mean_delay_s = ParseNumber<double>(f[5], line);
    r.afr = ParseNumber<double>(f[6], line);
    r.completed = ParseNumber<int>(f[7], line);
    r.failed_stale = ParseNumber<int>(f[8], line);
    r.failed_other = ParseNumber<int>(f[9], line);
    rows.push_back(r);
  }
  return rows;
}

void WriteSummary(std::ostream& out, std::span<const MetricsRow> rows) {
  struct Acc {
    int n = 0;
    double wcr = 0.0;
    double delay = 0.0;
    double afr = 0.0;
    void Add(const MetricsRow& r) {
      ++n;
      wcr += r.wcr;
      delay += r.mean_delay_s;
      afr += r.afr;
    }
  };
  std::map<std::tuple<std::string, int, int>, Acc> cells;
  std::map<std::string, Acc> modes;
  for (const MetricsRow& r : rows) {
    const std::string m(ToString(r.mode));
    cells[{m, r.network_size, r.task_count}].Add(r);
    modes[m].Add(r);
  }
  out << fmt::format("{:<10} {:>8} {:>6} {:>5} {:>8} {:>12} {:>8}\n", "mode", "size",
                     "tasks", "runs", "wcr", "delay_s", "afr");
  for (const auto& [key, a] : cells) {
    out << fmt::format("{:<10} {:>8} {:>6} {:>5} {:>8.4f} {:>12.2f} {:>8.4f}\n",
                       std::get<0>(key), std::get<1>(key), std::get<2>(key), a.n,
                       a.wcr / a.n, a.delay / a.n, a.afr / a.n);
  }
  out << "\nper-mode means\n";
  for (const auto& [m, a] : modes) {
    out << fmt::format("{:<10} runs={} wcr={:.4f} delay_s={:.2f} afr={:.4f}\n", m, a.n,
                       a.wcr / a.n, a.delay / a.n, a.afr / a.n);
  }
}

void WriteTaskRecordsCsv(std::ostream& out, std::span<const TaskRecord> tasks) {
  out << "task_id,priority,arrival_s,deadline_s,status,fail_reason,finish_s\n";
  for (const TaskRecord& t : tasks) {
    out << t.task_id << ',' << t.priority << ',' << FormatDouble(t.arrival) << ','
        << FormatDouble(t.deadline) << ','
        << (t.completed ? "completed" : t.Terminal() ? "failed" : "open") << ','
        << ToString(t.fail_reason) << ',' << FormatDouble(t.finish) << '\n';
  }
}

std::vector<TaskRecord> ReadTaskRecordsCsv(std::istream& in) {
  std::vector<TaskRecord> out;
  for (const auto& f :
       ReadRows(in, "task_id,priority,arrival_s,deadline_s,status,fail_reason,finish_s", 7)) {
    const int line = std::stoi(f[7]);
    TaskRecord t;
    t.task_id = ParseNumber<TaskId>(f[0], line);
    t.priority = ParseNumber<int>(f[1], line);
    t.arrival = ParseNumber<double>(f[2], line);
    t.deadline = ParseNumber<double>(f[3], line);
    t.completed = f[4] == "completed";
    t.fail_reason = ParseFailureReason(f[5]);
    t.finish = ParseNumber<double>(f[6], line);
    out.push_back(t);
  }
  return out;
}

void WriteStalenessCsv(std::ostream& out, std::span<const StalenessSample> samples) {
  out << "t,nodes,sum_s,mean_s\n";
  for (const StalenessSample& s : samples) {
    out << FormatDouble(s.t) << ',' << s.nodes << ',' << FormatDouble(s.sum_s) << ','
        << FormatDouble(s.nodes > 0 ? s.sum_s / s.nodes : 0.0) << '\n';
  }
}

std::vector<StalenessSample> ReadStalenessCsv(std::istream& in) {
  std::vector<StalenessSample> out;
  for (const auto& f : ReadRows(in, "t,nodes,sum_s,mean_s", 4)) {
    const int line = std::stoi(f[4]);
    out.push_back({ParseNumber<double>(f[0], line), ParseNumber<int>(f[1], line),
                   ParseNumber<double>(f[2], line)});
  }
  return out;
}

}  // namespace cnsc
