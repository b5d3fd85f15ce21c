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

#include "cnsc/task_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "cnsc/util.h"

namespace cnsc {

namespace {

constexpr std::string_view kFusionType = "fusion";

std::vector<std::string> Words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double ParseNumber(const std::string& s, int line) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(
        fmt::format("knowledge base line {}: '{}' is not a number", line, s));
  }
}

}  // namespace

std::string_view ToString(StageKind kind) {
  switch (kind) {
    case StageKind::kSensing:
      return "sensing";
    case StageKind::kProcessing:
      return "processing";
    case StageKind::kTransmission:
      return "transmission";
    case StageKind::kFusion:
      return "fusion";
    case StageKind::kDistribution:
      return "distribution";
  }
  return "?";
}

StageKind ParseStageKind(std::string_view text) {
  for (int k = 0; k <= static_cast<int>(StageKind::kDistribution); ++k) {
    if (ToString(static_cast<StageKind>(k)) == text) return static_cast<StageKind>(k);
  }
  throw ValidationError("unknown stage kind '" + std::string(text) + "'");
}

const StageSpec& TaskSpec::Stage(StageId id) const {
  if (id < 0 || static_cast<size_t>(id) >= stages.size() ||
      stages[id].stage_id != id) {
    throw ValidationError(fmt::format("task {} has no stage {}", task_id, id));
  }
  return stages[id];
}

std::vector<StageId> TaskSpec::Predecessors(StageId stage) const {
  std::vector<StageId> out;
  for (const auto& [from, to] : edges) {
    if (to == stage) out.push_back(from);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<StageId> TaskSpec::TopologicalOrder() const {
  const size_t n = stages.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<StageId>> succ(n);
  for (const auto& [from, to] : edges) {
    if (from < 0 || to < 0 || static_cast<size_t>(from) >= n ||
        static_cast<size_t>(to) >= n) {
      throw ValidationError(fmt::format("task {}: edge ({}, {}) references a missing stage",
                                        task_id, from, to));
    }
    succ[from].push_back(to);
    ++indegree[to];
  }
  // Kahn with a min-ordered ready set for determinism.
  std::vector<StageId> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(static_cast<StageId>(i));
  }
  std::vector<StageId> order;
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    const StageId s = *it;
    ready.erase(it);
    order.push_back(s);
    for (StageId t : succ[s]) {
      if (--indegree[t] == 0) ready.push_back(t);
    }
  }
  if (order.size() != n) {
    throw ValidationError(fmt::format("task {}: stage graph has a cycle", task_id));
  }
  return order;
}

void TaskSpec::Validate() const {
  if (priority < 1 || priority > 4) {
    throw ValidationError(
        fmt::format("task {}: priority {} outside 1..4", task_id, priority));
  }
  if (!(deadline > arrival)) {
    throw ValidationError(fmt::format("task {}: deadline {} not after arrival {}",
                                      task_id, deadline, arrival));
  }
  if (quality < 0.0 || quality > 1.0) {
    throw ValidationError(fmt::format("task {}: quality {} outside [0, 1]", task_id,
                                      quality));
  }
  for (size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    if (s.stage_id != static_cast<StageId>(i)) {
      throw ValidationError(fmt::format("task {}: stage ids must be 0..n-1", task_id));
    }
    if (s.input_gb < 0 || s.output_gb < 0 || s.compute_gb < 0 || s.transfer_gb < 0 ||
        s.sensing_duration_s < 0) {
      throw ValidationError(
          fmt::format("task {} stage {}: negative volume", task_id, s.stage_id));
    }
    if (IsTransferStage(s.kind) && s.compute_gb != 0.0) {
      throw ValidationError(fmt::format(
          "task {} stage {}: transfer stages have no compute demand", task_id, i));
    }
    if (IsComputeStage(s.kind) && s.transfer_gb != 0.0) {
      throw ValidationError(fmt::format(
          "task {} stage {}: compute stages have no transfer demand", task_id, i));
    }
  }
  TopologicalOrder();
}

void DemandCurve::Validate(size_t stages) const {
  if (points.empty()) throw ValidationError("demand curve has no points");
  for (size_t i = 0; i < points.size(); ++i) {
    const CurvePoint& p = points[i];
    if (p.quality < 0.0 || p.quality > 1.0) {
      throw ValidationError(fmt::format("curve quality {} outside [0, 1]", p.quality));
    }
    if (p.factors.size() != stages) {
      throw ValidationError(fmt::format("curve point {} has {} factors, expected {}",
                                        i, p.factors.size(), stages));
    }
    for (double f : p.factors) {
      if (!(f > 0.0)) throw ValidationError("curve factors must be > 0");
    }
    if (i > 0) {
      const CurvePoint& q = points[i - 1];
      if (!(p.quality > q.quality)) {
        throw ValidationError("curve quality levels must strictly increase");
      }
      for (size_t k = 0; k < stages; ++k) {
        if (p.factors[k] < q.factors[k]) {
          throw ValidationError(fmt::format(
              "curve factor of stage {} decreases at quality {}", k, p.quality));
        }
      }
    }
  }
}

std::vector<double> DemandCurve::Factors(double quality) const {
  if (quality <= points.front().quality) return points.front().factors;
  if (quality >= points.back().quality) return points.back().factors;
  size_t hi = 1;
  while (points[hi].quality < quality) ++hi;
  const CurvePoint& a = points[hi - 1];
  const CurvePoint& b = points[hi];
  if (quality == b.quality) return b.factors;
  const double u = (quality - a.quality) / (b.quality - a.quality);
  std::vector<double> out(a.factors.size());
  for (size_t k = 0; k < out.size(); ++k) {
    out[k] = a.factors[k] + u * (b.factors[k] - a.factors[k]);
  }
  return out;
}

std::vector<double> IsotonicNonDecreasing(std::span<const double> values) {
  struct Block {
    double sum;
    int count;
    double Mean() const { return sum / count; }
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 &&
           blocks[blocks.size() - 2].Mean() > blocks.back().Mean()) {
      Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.Mean());
  return out;
}

KnowledgeBase::Entry FusionEntry(const FusionParams& p) {
  KnowledgeBase::Entry e;
  e.stages = {StageKind::kSensing, StageKind::kProcessing, StageKind::kTransmission,
              StageKind::kFusion, StageKind::kDistribution};
  e.base = {
      {0.0, 0.0, p.raw_gb, p.sensing_duration_s},
      {p.processing_intensity * p.raw_gb, 0.0, p.preprocessed_gb, 0.0},
      {0.0, p.preprocessed_gb, p.preprocessed_gb, 0.0},
      {p.fusion_intensity * p.fusion_streams * p.preprocessed_gb, 0.0, p.product_gb, 0.0},
      {0.0, p.product_gb, p.product_gb, 0.0},
  };
  const std::vector<double> ones(5, 1.0);
  e.curve.points = {
      {0.0, std::vector<double>(5, 0.4), 0.50, 0.10},
      {0.5, std::vector<double>(5, 0.7), 0.75, 0.07},
      {1.0, ones, 0.95, 0.03},
  };
  e.samples.assign(5, 0);
  return e;
}

KnowledgeBase KnowledgeBase::Default() {
  KnowledgeBase kb;
  kb.Put(std::string(kFusionType), FusionEntry());
  return kb;
}

void KnowledgeBase::Put(std::string type, Entry entry) {
  if (type.empty() || type.find_first_of(" \t\n") != std::string::npos) {
    throw ValidationError("task type names must be non-empty single words");
  }
  if (entry.base.size() != entry.stages.size()) {
    throw ValidationError(fmt::format("task type {}: {} base demands for {} stages",
                                      type, entry.base.size(), entry.stages.size()));
  }
  entry.curve.Validate(entry.stages.size());
  entry.samples.resize(entry.stages.size(), 0);
  entries_[std::move(type)] = std::move(entry);
}

bool KnowledgeBase::Has(std::string_view type) const {
  return entries_.find(type) != entries_.end();
}

const KnowledgeBase::Entry& KnowledgeBase::Get(std::string_view type) const {
  auto it = entries_.find(type);
  if (it == entries_.end()) {
    throw ValidationError("unknown task type '" + std::string(type) + "'");
  }
  return it->second;
}

std::vector<StageDemand> KnowledgeBase::QueryDemands(std::string_view type,
                                                     double quality) const {
  const Entry& e = Get(type);
  if (!(quality >= 0.0 && quality <= 1.0)) {
    throw ValidationError(fmt::format("quality {} outside [0, 1]", quality));
  }
  const std::vector<double> f = e.curve.Factors(quality);
  std::vector<StageDemand> out(e.base.size());
  for (size_t k = 0; k < out.size(); ++k) {
    out[k] = {e.base[k].compute_gb * f[k], e.base[k].transfer_gb * f[k],
              e.base[k].output_gb * f[k], e.base[k].duration_s};
  }
  return out;
}

void KnowledgeBase::Calibrate(std::span<const Feedback> feedback, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ValidationError("calibration weight must be in (0, 1]");
  }
  for (const Feedback& fb : feedback) {
    auto it = entries_.find(fb.task_type);
    if (it == entries_.end()) {
      throw ValidationError("feedback for unknown task type '" + fb.task_type + "'");
    }
    Entry& e = it->second;
    if (fb.stage < 0 || static_cast<size_t>(fb.stage) >= e.stages.size()) {
      throw ValidationError(
          fmt::format("feedback for {} references stage {}", fb.task_type, fb.stage));
    }
    if (!(fb.realized_factor > 0.0)) {
      throw ValidationError("realized demand factor must be > 0");
    }
    auto& pts = e.curve.points;
    size_t nearest = 0;
    for (size_t i = 1; i < pts.size(); ++i) {
      if (std::abs(pts[i].quality - fb.quality) <
          std::abs(pts[nearest].quality - fb.quality)) {
        nearest = i;
      }
    }
    double& f = pts[nearest].factors[fb.stage];
    f = (1.0 - alpha) * f + alpha * fb.realized_factor;
    std::vector<double> column(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) column[i] = pts[i].factors[fb.stage];
    const std::vector<double> fitted = IsotonicNonDecreasing(column);
    for (size_t i = 0; i < pts.size(); ++i) pts[i].factors[fb.stage] = fitted[i];
    ++e.samples[fb.stage];
  }
}

// Text format, one record per task type:
//   task_type fusion
//   stages sensing processing ...
//   base <compute_gb> <transfer_gb> <output_gb> <duration_s>   (per stage)
//   point <quality> <perf_mean> <perf_spread> <factor per stage>
//   samples <count per stage>
//   end
void KnowledgeBase::Write(std::ostream& out) const {
  for (const auto& [type, e] : entries_) {
    out << "task_type " << type << "\n";
    out << "stages";
    for (StageKind k : e.stages) out << ' ' << ToString(k);
    out << "\n";
    for (const StageDemand& d : e.base) {
      out << fmt::format("base {} {} {} {}\n", FormatDouble(d.compute_gb),
                         FormatDouble(d.transfer_gb), FormatDouble(d.output_gb),
                         FormatDouble(d.duration_s));
    }
    for (const CurvePoint& p : e.curve.points) {
      out << fmt::format("point {} {} {}", FormatDouble(p.quality),
                         FormatDouble(p.perf_mean), FormatDouble(p.perf_spread));
      for (double f : p.factors) out << ' ' << FormatDouble(f);
      out << "\n";
    }
    out << "samples";
    for (int64_t n : e.samples) out << ' ' << n;
    out << "\nend\n";
  }
}

KnowledgeBase KnowledgeBase::Read(std::istream& in) {
  KnowledgeBase kb;
  std::string line;
  int lineno = 0;
  std::string type;
  Entry entry;
  bool open = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto w = Words(line);
    if (w.empty() || w[0][0] == '#') continue;
    const std::string& key = w[0];
    if (key == "task_type") {
      if (open || w.size() != 2) {
        throw ValidationError(fmt::format("knowledge base line {}: bad task_type", lineno));
      }
      type = w[1];
      entry = Entry{};
      open = true;
      continue;
    }
    if (!open) {
      throw ValidationError(
          fmt::format("knowledge base line {}: '{}' outside a record", lineno, key));
    }
    if (key == "stages") {
      for (size_t i = 1; i < w.size(); ++i) entry.stages.push_back(ParseStageKind(w[i]));
    } else if (key == "base" && w.size() == 5) {
      entry.base.push_back({ParseNumber(w[1], lineno), ParseNumber(w[2], lineno),
                            ParseNumber(w[3], lineno), ParseNumber(w[4], lineno)});
    } else if (key == "point" && w.size() >= 4) {
      CurvePoint p;
      p.quality = ParseNumber(w[1], lineno);
      p.perf_mean = ParseNumber(w[2], lineno);
      p.perf_spread = ParseNumber(w[3], lineno);
      for (size_t i = 4; i < w.size(); ++i) p.factors.push_back(ParseNumber(w[i], lineno));
      entry.curve.points.push_back(std::move(p));
    } else if (key == "samples") {
      for (size_t i = 1; i < w.size(); ++i) {
        entry.samples.push_back(static_cast<int64_t>(ParseNumber(w[i], lineno)));
      }
    } else if (key == "end") {
      kb.Put(type, std::move(entry));
      entry = Entry{};
      open = false;
    } else {
      throw ValidationError(
          fmt::format("knowledge base line {}: unexpected '{}'", lineno, line));
    }
  }
  if (open) throw ValidationError("knowledge base: record '" + type + "' missing end");
  return kb;
}

bool KnowledgeBase::operator==(const KnowledgeBase& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  for (const auto& [type, e] : entries_) {
    auto it = o.entries_.find(type);
    if (it == o.entries_.end()) return false;
    const Entry& f = it->second;
    if (e.stages != f.stages || e.samples != f.samples ||
        e.base.size() != f.base.size() ||
        e.curve.points.size() != f.curve.points.size()) {
      return false;
    }
    for (size_t i = 0; i < e.base.size(); ++i) {
      const StageDemand& a = e.base[i];
      const StageDemand& b = f.base[i];
      if (a.compute_gb != b.compute_gb || a.transfer_gb != b.transfer_gb ||
          a.output_gb != b.output_gb || a.duration_s != b.duration_s) {
        return false;
      }
    }
    for (size_t i = 0; i < e.curve.points.size(); ++i) {
      const CurvePoint& a = e.curve.points[i];
      const CurvePoint& b = f.curve.points[i];
      if (a.quality != b.quality || a.factors != b.factors ||
          a.perf_mean != b.perf_mean || a.perf_spread != b.perf_spread) {
        return false;
      }
    }
  }
  return true;
}

TaskSpec BuildFusionTask(TaskId id, int priority, double arrival, double deadline,
                         double quality, const KnowledgeBase& kb, int target) {
  const KnowledgeBase::Entry& e = kb.Get(kFusionType);
  const std::vector<StageDemand> d = kb.QueryDemands(kFusionType, quality);
  TaskSpec t;
  t.task_id = id;
  t.type = std::string(kFusionType);
  t.priority = priority;
  t.arrival = arrival;
  t.deadline = deadline;
  t.quality = quality;
  t.target = target;
  double input = 0.0;
  for (size_t k = 0; k < e.stages.size(); ++k) {
    StageSpec s;
    s.stage_id = static_cast<StageId>(k);
    s.kind = e.stages[k];
    s.input_gb = input;
    s.output_gb = d[k].output_gb;
    s.compute_gb = d[k].compute_gb;
    s.transfer_gb = d[k].transfer_gb;
    s.sensing_duration_s = d[k].duration_s;
    input = s.output_gb;
    t.stages.push_back(s);
    if (k > 0) t.edges.emplace_back(static_cast<StageId>(k - 1), static_cast<StageId>(k));
  }
  t.Validate();
  return t;
}

void WorkloadParams::Validate() const {
  if (count < 0) throw ValidationError("task count must be >= 0");
  double sum = 0.0;
  for (double w : priority_mix) {
    if (w < 0.0) throw ValidationError("priority mix weights must be >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError("priority mix must have positive mass");
  if (!(arrival_end >= arrival_start)) {
    throw ValidationError("arrival window end precedes its start");
  }
  if (!(regular_deadline_s > 0.0) || !(emergency_deadline_s > 0.0)) {
    throw ValidationError("deadline offsets must be > 0");
  }
  if (!(0.0 <= quality_min && quality_min <= quality_max && quality_max <= 1.0)) {
    throw ValidationError("quality range must satisfy 0 <= min <= max <= 1");
  }
  if (target_count < 1) throw ValidationError("at least one sensing target is needed");
}

std::vector<TaskSpec> GenerateWorkload(const WorkloadParams& p,
                                       const KnowledgeBase& kb) {
  p.Validate();
  Rng rng(HashMix(p.seed, 0x7a5c));
  const double total =
      std::accumulate(p.priority_mix.begin(), p.priority_mix.end(), 0.0);
  struct Draw {
    double arrival;
    int priority;
    double quality;
    int target;
    int order;
  };
  std::vector<Draw> draws;
  draws.reserve(p.count);
  for (int i = 0; i < p.count; ++i) {
    Draw d;
    d.arrival = rng.Uniform(p.arrival_start, p.arrival_end);
    double u = rng.Uniform() * total;
    d.priority = 4;
    for (int k = 0; k < 4; ++k) {
      if (u < p.priority_mix[k]) {
        d.priority = k + 1;
        break;
      }
      u -= p.priority_mix[k];
    }
    while (p.priority_mix[d.priority - 1] == 0.0) --d.priority;
    d.quality = rng.Uniform(p.quality_min, p.quality_max);
    d.target = static_cast<int>(rng.Below(p.target_count));
    d.order = i;
    draws.push_back(d);
  }
  std::sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.order < b.order;
  });
  std::vector<TaskSpec> tasks;
  tasks.reserve(draws.size());
  for (size_t i = 0; i < draws.size(); ++i) {
    const Draw& d = draws[i];
    const double offset = d.priority == 4 ? p.emergency_deadline_s : p.regular_deadline_s;
    tasks.push_back(BuildFusionTask(static_cast<TaskId>(i), d.priority, d.arrival,
                                    d.arrival + offset, d.quality, kb, d.target));
  }
  return tasks;
}

void WriteWorkloadCsv(std::ostream& out, std::span<const TaskSpec> tasks) {
  out << "task_id,type,priority,arrival_s,deadline_s,quality\n";
  for (const TaskSpec& t : tasks) {
    out << fmt::format("{},{},{},{},{},{}\n", t.task_id, t.type, t.priority,
                       FormatDouble(t.arrival), FormatDouble(t.deadline),
                       FormatDouble(t.quality));
  }
}

}  // namespace cnsc
