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

#include <cmath>
#include <sstream>

#include "cnsc/util.h"
#include "gtest/gtest.h"

namespace cnsc {
namespace {

TEST(FusionTask, DefaultVolumes) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  const TaskSpec t = BuildFusionTask(0, 2, 0.0, 3600.0, 1.0, kb);
  ASSERT_EQ(t.stages.size(), 5u);
  EXPECT_EQ(t.edges.size(), 4u);
  EXPECT_EQ(t.stages[0].kind, StageKind::kSensing);
  EXPECT_EQ(t.stages[4].kind, StageKind::kDistribution);
  EXPECT_DOUBLE_EQ(t.stages[0].output_gb, 5.0);
  EXPECT_DOUBLE_EQ(t.stages[1].input_gb, 5.0);
  EXPECT_DOUBLE_EQ(t.stages[1].compute_gb, 5.0);
  EXPECT_DOUBLE_EQ(t.stages[2].transfer_gb, t.stages[1].output_gb);
  EXPECT_DOUBLE_EQ(t.stages[3].compute_gb, 2 * t.stages[1].output_gb);
  EXPECT_DOUBLE_EQ(t.stages[3].output_gb, 0.02);
  EXPECT_DOUBLE_EQ(t.stages[4].transfer_gb, 0.02);
  for (size_t k = 1; k < t.stages.size(); ++k) {
    EXPECT_DOUBLE_EQ(t.stages[k].input_gb, t.stages[k - 1].output_gb);
  }
  EXPECT_EQ(t.TopologicalOrder(), (std::vector<StageId>{0, 1, 2, 3, 4}));
  EXPECT_EQ(t.Predecessors(3), std::vector<StageId>{2});
}

TEST(FusionTask, LowerQualityNeverNeedsMore) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  const auto lo = kb.Get("fusion").curve.Factors(0.5);
  const auto hi = kb.Get("fusion").curve.Factors(1.0);
  for (size_t k = 0; k < lo.size(); ++k) EXPECT_LE(lo[k], hi[k]);
  EXPECT_THROW(BuildFusionTask(0, 2, 0.0, 10.0, 1.0, KnowledgeBase{}), ValidationError);
}

TEST(TaskSpec, ValidationCatchesCyclesAndBadFields) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  TaskSpec t = BuildFusionTask(0, 2, 0.0, 3600.0, 1.0, kb);
  TaskSpec cyclic = t;
  cyclic.edges.emplace_back(4, 0);
  EXPECT_THROW(cyclic.Validate(), ValidationError);
  TaskSpec bad_priority = t;
  bad_priority.priority = 5;
  EXPECT_THROW(bad_priority.Validate(), ValidationError);
  TaskSpec bad_deadline = t;
  bad_deadline.deadline = 0.0;
  EXPECT_THROW(bad_deadline.Validate(), ValidationError);
  TaskSpec bad_kind = t;
  bad_kind.stages[2].compute_gb = 1.0;
  EXPECT_THROW(bad_kind.Validate(), ValidationError);
  TaskSpec empty;
  empty.deadline = 1.0;
  EXPECT_NO_THROW(empty.Validate());
  EXPECT_TRUE(empty.TopologicalOrder().empty());
}

TEST(KnowledgeBase, QueryIsExactAtPointsAndLinearBetween) {
  KnowledgeBase kb;
  KnowledgeBase::Entry e;
  e.stages = {StageKind::kProcessing};
  e.base = {{10.0, 0.0, 1.0, 0.0}};
  e.curve.points = {{0.0, {0.4}, 0, 0}, {1.0, {0.8}, 0, 0}};
  kb.Put("t", e);
  EXPECT_DOUBLE_EQ(kb.QueryDemands("t", 0.0)[0].compute_gb, 4.0);
  EXPECT_DOUBLE_EQ(kb.QueryDemands("t", 1.0)[0].compute_gb, 8.0);
  EXPECT_NEAR(kb.QueryDemands("t", 0.5)[0].compute_gb, 6.0, 1e-12);
  EXPECT_THROW(kb.QueryDemands("t", 1.5), ValidationError);
  EXPECT_THROW(kb.QueryDemands("nope", 0.5), ValidationError);
}

TEST(KnowledgeBase, RandomQueriesMatchIndependentInterpolation) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  const auto& e = kb.Get("fusion");
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double q = rng.Uniform();
    const auto d = kb.QueryDemands("fusion", q);
    // Oracle: locate the bracketing segment by linear search.
    const auto& pts = e.curve.points;
    size_t seg = 0;
    while (seg + 2 < pts.size() && q > pts[seg + 1].quality) ++seg;
    const double u = (q - pts[seg].quality) / (pts[seg + 1].quality - pts[seg].quality);
    for (size_t k = 0; k < d.size(); ++k) {
      const double f = pts[seg].factors[k] * (1 - u) + pts[seg + 1].factors[k] * u;
      EXPECT_NEAR(d[k].compute_gb, e.base[k].compute_gb * f, 1e-9);
      EXPECT_NEAR(d[k].transfer_gb, e.base[k].transfer_gb * f, 1e-9);
    }
  }
}

TEST(KnowledgeBase, RejectsNonMonotoneCurve) {
  KnowledgeBase kb;
  KnowledgeBase::Entry e;
  e.stages = {StageKind::kProcessing};
  e.base = {{1.0, 0.0, 1.0, 0.0}};
  e.curve.points = {{0.0, {0.9}, 0, 0}, {1.0, {0.5}, 0, 0}};
  EXPECT_THROW(kb.Put("t", e), ValidationError);
}

TEST(Calibrate, IdenticalFeedbackIsAFixedPoint) {
  KnowledgeBase kb = KnowledgeBase::Default();
  const KnowledgeBase before = kb;
  std::vector<Feedback> fb = {{"fusion", 1, 0.5, 0.7}, {"fusion", 3, 1.0, 1.0}};
  kb.Calibrate(fb);
  const auto& a = before.Get("fusion").curve.points;
  const auto& b = kb.Get("fusion").curve.points;
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].factors, b[i].factors);
  EXPECT_EQ(kb.Get("fusion").samples[1], 1);
}

TEST(Calibrate, TwentyPercentAboveMovesFourPercent) {
  KnowledgeBase kb = KnowledgeBase::Default();
  std::vector<Feedback> fb = {{"fusion", 1, 0.5, 0.7 * 1.2}};
  kb.Calibrate(fb, 0.2);
  EXPECT_NEAR(kb.Get("fusion").curve.points[1].factors[1], 0.7 * 1.04, 1e-12);
  std::vector<Feedback> unknown = {{"other", 0, 0.5, 1.0}};
  EXPECT_THROW(kb.Calibrate(unknown), ValidationError);
}

TEST(Calibrate, AdversarialStreamStaysMonotone) {
  KnowledgeBase kb = KnowledgeBase::Default();
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const int stage = static_cast<int>(rng.Below(5));
    const double q = rng.Below(2) ? 0.0 : 1.0;
    // Low quality claims high demand and vice versa.
    const double f = q == 0.0 ? rng.Uniform(1.5, 3.0) : rng.Uniform(0.05, 0.3);
    std::vector<Feedback> fb = {{"fusion", stage, q, f}};
    kb.Calibrate(fb);
    const auto& pts = kb.Get("fusion").curve.points;
    for (size_t p = 1; p < pts.size(); ++p) {
      for (size_t k = 0; k < 5; ++k) {
        ASSERT_LE(pts[p - 1].factors[k], pts[p].factors[k] + 1e-12);
      }
    }
  }
}

// The pooled fit must reach the least-squares optimum over all
// non-decreasing triples.
TEST(Isotonic, MatchesBruteForceLeastSquares) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v = {std::round(rng.Uniform(0, 20)) / 10,
                             std::round(rng.Uniform(0, 20)) / 10,
                             std::round(rng.Uniform(0, 20)) / 10};
    const auto fit = IsotonicNonDecreasing(v);
    double best = 1e300;
    // Grid search at 0.01 resolution; pooled means may fall between grid
    // points, hence the loose lower bound.
    for (double a = 0; a <= 2.0001; a += 0.01) {
      for (double b = a; b <= 2.0001; b += 0.01) {
        for (double c = b; c <= 2.0001; c += 0.01) {
          const double obj = (a - v[0]) * (a - v[0]) + (b - v[1]) * (b - v[1]) +
                             (c - v[2]) * (c - v[2]);
          best = std::min(best, obj);
        }
      }
    }
    const double got = (fit[0] - v[0]) * (fit[0] - v[0]) +
                       (fit[1] - v[1]) * (fit[1] - v[1]) +
                       (fit[2] - v[2]) * (fit[2] - v[2]);
    EXPECT_LE(fit[0], fit[1]);
    EXPECT_LE(fit[1], fit[2]);
    EXPECT_LE(got, best + 1e-9);
    EXPECT_GE(got, best - 1e-3);
  }
}

TEST(KnowledgeBase, TextRoundTrip) {
  KnowledgeBase kb = KnowledgeBase::Default();
  std::vector<Feedback> fb = {{"fusion", 2, 0.4, 0.81234567}};
  kb.Calibrate(fb);
  std::ostringstream out;
  kb.Write(out);
  std::istringstream in(out.str());
  const KnowledgeBase back = KnowledgeBase::Read(in);
  EXPECT_TRUE(back == kb);
  EXPECT_NE(out.str().find("task_type fusion"), std::string::npos);
  std::istringstream broken("task_type x\nstages processing\nbase 1 0 1 zz\nend\n");
  EXPECT_THROW(KnowledgeBase::Read(broken), ValidationError);
}

TEST(Workload, EmptyAndDeterministic) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  WorkloadParams p;
  EXPECT_TRUE(GenerateWorkload(p, kb).empty());
  p.count = 300;
  p.seed = 42;
  p.target_count = 7;
  const auto a = GenerateWorkload(p, kb);
  const auto b = GenerateWorkload(p, kb);
  std::ostringstream sa, sb;
  WriteWorkloadCsv(sa, a);
  WriteWorkloadCsv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  p.seed = 43;
  std::ostringstream sc;
  WriteWorkloadCsv(sc, GenerateWorkload(p, kb));
  EXPECT_NE(sa.str(), sc.str());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].task_id, static_cast<TaskId>(i));
    if (i) EXPECT_LE(a[i - 1].arrival, a[i].arrival);
    EXPECT_GE(a[i].arrival, 0.0);
    EXPECT_LT(a[i].arrival, 3600.0);
    EXPECT_DOUBLE_EQ(a[i].deadline - a[i].arrival, a[i].IsEmergency() ? 600.0 : 3600.0);
    EXPECT_GE(a[i].target, 0);
    EXPECT_LT(a[i].target, 7);
  }
}

TEST(Workload, UniformMixWithinThreeSigma) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  WorkloadParams p;
  p.count = 4000;
  p.priority_mix = {1, 1, 1, 1};
  p.seed = 2026;
  std::array<int, 4> counts{};
  for (const TaskSpec& t : GenerateWorkload(p, kb)) ++counts[t.priority - 1];
  const double sigma = std::sqrt(4000 * 0.25 * 0.75);
  double chi2 = 0.0;
  for (int c : counts) {
    EXPECT_LE(std::abs(c - 1000.0), 3 * sigma);
    chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  }
  // 3 degrees of freedom, p = 0.001 critical value.
  EXPECT_LT(chi2, 16.27);
}

TEST(Workload, CsvHeader) {
  const KnowledgeBase kb = KnowledgeBase::Default();
  std::vector<TaskSpec> tasks = {BuildFusionTask(3, 4, 10.0, 610.0, 0.75, kb)};
  std::ostringstream out;
  WriteWorkloadCsv(out, tasks);
  EXPECT_EQ(out.str(),
            "task_id,type,priority,arrival_s,deadline_s,quality\n"
            "3,fusion,4,10,610,0.75\n");
}

}  // namespace
}  // namespace cnsc
