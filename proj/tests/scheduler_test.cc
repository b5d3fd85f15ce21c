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

#include "cnsc/scheduler.h"

#include <random>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "scheduler_instances.h"

namespace cnsc {
namespace {

using testing_oracles::HandPlan;
using testing_oracles::Instance;
using testing_oracles::RandomAuditInstance;
using testing_oracles::RandomTinyInstance;

NodeInfo Node(double compute, double storage = 100.0, bool sensor = true) {
  NodeInfo n;
  n.schedulable = true;
  n.compute_bound = compute;
  n.storage_bound = storage;
  n.sensor = sensor;
  return n;
}

NodeInfo Station() {
  NodeInfo n;
  n.regime = Regime::kGround;
  return n;
}

TaskSpec ComputeTask(TaskId id, double compute_gb, double arrival, double deadline,
                     int priority = 1) {
  TaskSpec t;
  t.task_id = id;
  t.type = "fusion";
  t.priority = priority;
  t.arrival = arrival;
  t.deadline = deadline;
  StageSpec s;
  s.kind = StageKind::kProcessing;
  s.compute_gb = compute_gb;
  s.output_gb = 0.1;
  t.stages.push_back(s);
  return t;
}

int Weight(const Plan& plan, std::span<const TaskSpec> tasks) {
  std::set<TaskId> failed;
  for (const auto& [id, r] : plan.unplaced) failed.insert(id);
  int w = 0;
  for (const TaskSpec& t : tasks) {
    if (!failed.count(t.task_id)) w += t.priority;
  }
  return w;
}

std::vector<const TaskSpec*> Pointers(const std::vector<TaskSpec>& tasks) {
  std::vector<const TaskSpec*> out;
  for (const TaskSpec& t : tasks) out.push_back(&t);
  return out;
}

// Two LEO satellites (0, 1) and one station (2). The target is visible
// from satellite 0 during [0, 100).
struct FusionFixture {
  ContactPlan plan = HandPlan(
      2, 1,
      {{0, 1, 0.0, 2000.0, LinkClass::kLaserIsl, 10e9},
       {1, 2, 0.0, 2000.0, LinkClass::kGround, 1e9}},
      {{0, 0, 0.0, 100.0}});
  std::vector<NodeInfo> nodes = {Node(5.0), Node(5.0), Station()};
  SchedulerConfig config;

  PlanningContext Context(double t_now = 0.0) const {
    PlanningContext ctx;
    ctx.plan = &plan;
    ctx.nodes = nodes;
    ctx.config = &config;
    ctx.t_now = t_now;
    return ctx;
  }
};

TEST(PlaceDagTest, EmptyDagPlacesNothing) {
  FusionFixture f;
  TaskSpec t;
  t.deadline = 10.0;
  const PlaceResult r = PlaceDag(t, f.Context(), ResourceTimeline{});
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(r.entries.empty());
}

TEST(PlaceDagTest, FiveGigabytesAtFivePerSecondTakesOneSecond) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  const TaskSpec t = ComputeTask(0, 5.0, 0.0, 100.0);
  const PlaceResult r = PlaceDag(t, f.Context(42.0), ResourceTimeline{});
  ASSERT_TRUE(r.ok);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].start, 42.0);
  EXPECT_EQ(r.entries[0].end, 43.0);
  EXPECT_EQ(r.entries[0].node, 0);
}

TEST(PlaceDagTest, FusionChainFollowsItsData) {
  FusionFixture f;
  const TaskSpec t = BuildFusionTask(7, 2, 0.0, 3600.0, 1.0, KnowledgeBase::Default());
  const PlaceResult r = PlaceDag(t, f.Context(), ResourceTimeline{});
  ASSERT_TRUE(r.ok);
  ASSERT_EQ(r.entries.size(), 5u);
  EXPECT_EQ(r.entries[0].node, 0);  // only satellite 0 sees the target
  EXPECT_EQ(r.entries[1].node, 0);
  EXPECT_EQ(r.entries[2].node, 0);
  EXPECT_EQ(r.entries[2].peer, 1);
  EXPECT_EQ(r.entries[3].node, 1);
  EXPECT_EQ(r.entries[4].peer, 2);
  EXPECT_EQ(r.entries[0].start, 0.0);
  EXPECT_EQ(r.entries[0].end, 30.0);
  for (size_t k = 1; k < 5; ++k) EXPECT_GE(r.entries[k].start, r.entries[k - 1].end);
  std::vector<TaskSpec> tasks = {t};
  EXPECT_TRUE(AuditEntries(r.entries, tasks, f.plan).empty());
}

TEST(PlaceDagTest, FailureReasons) {
  FusionFixture f;
  // Distribution with no ground window from satellite 0.
  f.plan = HandPlan(2, 1, {{0, 1, 0.0, 100.0, LinkClass::kLaserIsl, 1e9}}, {});
  TaskSpec t = ComputeTask(0, 5.0, 0.0, 500.0);
  StageSpec d;
  d.stage_id = 1;
  d.kind = StageKind::kDistribution;
  d.input_gb = 0.1;
  d.transfer_gb = 0.1;
  d.output_gb = 0.1;
  t.stages.push_back(d);
  t.edges = {{0, 1}};
  f.nodes = {Node(5.0), Node(5.0), Station()};
  f.nodes[1].schedulable = false;
  EXPECT_EQ(PlaceDag(t, f.Context(), ResourceTimeline{}).reason, FailureReason::kNoWindow);

  // 100 s of work against a 10 s deadline.
  const TaskSpec late = ComputeTask(1, 500.0, 0.0, 10.0);
  EXPECT_EQ(PlaceDag(late, f.Context(), ResourceTimeline{}).reason,
            FailureReason::kDeadlineInfeasible);

  // t_now past the deadline.
  const TaskSpec expired = ComputeTask(2, 5.0, 0.0, 10.0);
  EXPECT_EQ(PlaceDag(expired, f.Context(20.0), ResourceTimeline{}).reason,
            FailureReason::kDeadlineInfeasible);
}

TEST(PlaceDagTest, FailedPlacementRetainsNothing) {
  FusionFixture f;
  ResourceTimeline tl;
  const TaskSpec late = ComputeTask(1, 500.0, 0.0, 10.0);
  std::vector<const TaskSpec*> pending = {&late};
  const Plan p = PlanPeriodic(pending, f.Context(), tl);
  EXPECT_EQ(p.unplaced.size(), 1u);
  EXPECT_EQ(tl.size(), 0u);
}

TEST(PlaceDagTest, ViewBoundsPlanning) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  ResourceView view;
  ResourceReport rep;
  rep.node_id = 0;
  rep.generation_time = 0.0;
  rep.entries = {{Resource::kCompute, 1.0, 0.0}};
  view.Merge(rep, 0.0);
  PlanningContext ctx = f.Context();
  ctx.view = &view;
  const PlaceResult r = PlaceDag(ComputeTask(0, 5.0, 0.0, 100.0), ctx, ResourceTimeline{});
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.entries[0].rate, 1.0);
  EXPECT_EQ(r.entries[0].end - r.entries[0].start, 5.0);
}

TEST(PlaceDagTest, EfficiencyHookScalesThroughput) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  f.config.efficiency[{"fusion", Regime::kLeo}] = 0.5;
  const PlaceResult r = PlaceDag(ComputeTask(0, 5.0, 0.0, 100.0), f.Context(), ResourceTimeline{});
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.entries[0].end, 2.0);
}

TEST(PlanPeriodicTest, NoPendingTasksGivesEmptyPlan) {
  FusionFixture f;
  ResourceTimeline tl;
  const Plan p = PlanPeriodic({}, f.Context(), tl);
  EXPECT_TRUE(p.entries.empty());
  EXPECT_TRUE(p.unplaced.empty());
}

TEST(PlanPeriodicTest, TwoIdenticalTasksCapacityForOne) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  const std::vector<TaskSpec> tasks = {ComputeTask(0, 50.0, 0.0, 15.0),
                                       ComputeTask(1, 50.0, 0.0, 15.0)};
  ResourceTimeline tl;
  const Plan p = PlanPeriodic(Pointers(tasks), f.Context(), tl);
  ASSERT_EQ(p.entries.size(), 1u);
  EXPECT_EQ(p.entries[0].task, 0);
  ASSERT_EQ(p.unplaced.size(), 1u);
  EXPECT_EQ(p.unplaced[0].first, 1);
  EXPECT_EQ(p.unplaced[0].second, FailureReason::kInsufficientResources);
}

TEST(PlanPeriodicTest, OrdersByPriorityThenDeadline) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  const std::vector<TaskSpec> tasks = {ComputeTask(0, 50.0, 0.0, 100.0, 1),
                                       ComputeTask(1, 50.0, 0.0, 100.0, 3),
                                       ComputeTask(2, 50.0, 0.0, 50.0, 3)};
  ResourceTimeline tl;
  const Plan p = PlanPeriodic(Pointers(tasks), f.Context(), tl);
  ASSERT_EQ(p.entries.size(), 3u);
  EXPECT_EQ(p.entries[0].task, 2);
  EXPECT_EQ(p.entries[1].task, 1);
  EXPECT_EQ(p.entries[2].task, 0);
  EXPECT_EQ(p.entries[2].start, 20.0);
}

std::vector<std::string> AuditAgainstBounds(const ResourceTimeline& tl,
                                            std::span<const NodeInfo> nodes) {
  std::vector<std::string> out;
  for (uint64_t key : tl.Keys()) {
    if (IsLinkKey(key)) continue;
    const NodeId n = static_cast<NodeId>(key >> 2);
    const Resource r = static_cast<Resource>(key & 3);
    const double bound = r == Resource::kCompute   ? nodes[n].compute_bound
                         : r == Resource::kStorage ? nodes[n].storage_bound
                                                   : 1.0;
    for (const Reservation& res : tl.At(key)) {
      if (tl.PeakUsage(key, res.start, res.end) > bound + 1e-6) {
        out.push_back(KeyName(key));
      }
    }
  }
  return out;
}

TEST(PlanPeriodicTest, RandomizedBatchesPassAudit) {
  std::mt19937_64 rng(11);
  int placed = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Instance inst = RandomAuditInstance(rng);
    ResourceTimeline tl;
    std::vector<ScheduleEntry> all;
    // Two planning rounds; the second starts later and sees the first's
    // reservations.
    const size_t half = inst.tasks.size() / 2;
    std::vector<TaskSpec> first(inst.tasks.begin(), inst.tasks.begin() + half);
    std::vector<TaskSpec> second(inst.tasks.begin() + half, inst.tasks.end());
    Plan p1 = PlanPeriodic(Pointers(first), inst.Context(0.0), tl);
    Plan p2 = PlanPeriodic(Pointers(second), inst.Context(30.0), tl);
    all = p1.entries;
    all.insert(all.end(), p2.entries.begin(), p2.entries.end());
    placed += static_cast<int>(all.size());
    const auto a = AuditTimelines(tl);
    ASSERT_TRUE(a.empty()) << "trial " << trial << ": " << a.front();
    const auto b = AuditEntries(all, inst.tasks, inst.plan);
    ASSERT_TRUE(b.empty()) << "trial " << trial << ": " << b.front();
    const auto c = AuditAgainstBounds(tl, inst.nodes);
    ASSERT_TRUE(c.empty()) << "trial " << trial << ": " << c.front();
  }
  EXPECT_GT(placed, 300);
}

TEST(PlanPeriodicTest, Deterministic) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst = RandomAuditInstance(rng);
    ResourceTimeline a;
    ResourceTimeline b;
    const Plan pa = PlanPeriodic(Pointers(inst.tasks), inst.Context(), a);
    const Plan pb = PlanPeriodic(Pointers(inst.tasks), inst.Context(), b);
    std::ostringstream sa;
    std::ostringstream sb;
    WritePlanCsv(sa, pa.entries, pa.unplaced);
    WritePlanCsv(sb, pb.entries, pb.unplaced);
    EXPECT_EQ(sa.str(), sb.str());
  }
}

TEST(PlanEmergencyTest, RejectsRegularPriority) {
  FusionFixture f;
  ResourceTimeline tl;
  EXPECT_THROW(PlanEmergency(ComputeTask(0, 5.0, 0.0, 10.0, 3), f.Context(), tl),
               ValidationError);
}

TEST(PlanEmergencyTest, IdleClusterStartsAtArrival) {
  FusionFixture f;
  ResourceTimeline tl;
  const Plan p = PlanEmergency(ComputeTask(0, 5.0, 17.0, 100.0, 4), f.Context(17.0), tl);
  ASSERT_EQ(p.entries.size(), 1u);
  EXPECT_EQ(p.entries[0].start, 17.0);
  EXPECT_TRUE(p.preempted.empty());
}

TEST(PlanEmergencyTest, PreemptsSingleVictim) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  ResourceTimeline tl;
  const std::vector<TaskSpec> regular = {ComputeTask(0, 500.0, 0.0, 1000.0, 1)};
  PlanPeriodic(Pointers(regular), f.Context(), tl);
  const Plan p = PlanEmergency(ComputeTask(1, 5.0, 10.0, 20.0, 4), f.Context(10.0), tl);
  ASSERT_EQ(p.preempted.size(), 1u);
  EXPECT_EQ(p.preempted[0], 0);
  ASSERT_EQ(p.entries.size(), 1u);
  EXPECT_EQ(p.entries[0].start, 10.0);
  EXPECT_TRUE(AuditTimelines(tl).empty());
}

TEST(PlanEmergencyTest, NeverPreemptsEmergencies) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  ResourceTimeline tl;
  PlanEmergency(ComputeTask(0, 500.0, 0.0, 1000.0, 4), f.Context(), tl);
  const Plan p = PlanEmergency(ComputeTask(1, 5.0, 10.0, 20.0, 4), f.Context(10.0), tl);
  EXPECT_TRUE(p.preempted.empty());
  ASSERT_EQ(p.unplaced.size(), 1u);
  EXPECT_EQ(tl.TasksActiveAfter(10.0), std::vector<TaskId>{0});
}

// Smallest victim count over all subsets of preemptible tasks.
std::optional<size_t> MinimalVictims(const TaskSpec& e, const PlanningContext& ctx,
                                     const ResourceTimeline& tl) {
  std::vector<TaskId> pool;
  for (TaskId id : tl.TasksActiveAfter(ctx.t_now)) {
    if (tl.PriorityOf(id) < 4) pool.push_back(id);
  }
  std::optional<size_t> best;
  for (uint32_t mask = 0; mask < (1u << pool.size()); ++mask) {
    ResourceTimeline copy = tl;
    size_t count = 0;
    for (size_t i = 0; i < pool.size(); ++i) {
      if (mask & (1u << i)) {
        copy.RemoveTask(pool[i], ctx.t_now);
        ++count;
      }
    }
    if (PlaceDag(e, ctx, copy).ok && (!best || count < *best)) best = count;
  }
  return best;
}

TEST(PlanEmergencyTest, VictimSetsAreMinimal) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int with_victims = 0;
  for (int trial = 0; trial < 300; ++trial) {
    FusionFixture f;
    f.nodes = {Node(5.0), Node(5.0), Station()};
    f.plan = HandPlan(2, 1, {}, {});
    f.config.max_compute_rate_gbps = trial % 2 ? 2.5 : 2.0;
    ResourceTimeline tl;
    const int k = 1 + static_cast<int>(rng() % 5);
    std::vector<TaskSpec> regular;
    for (int i = 0; i < k; ++i) {
      regular.push_back(ComputeTask(i, 20.0 + 200.0 * u(rng), 0.0, 1000.0,
                                    1 + static_cast<int>(rng() % 3)));
    }
    PlanPeriodic(Pointers(regular), f.Context(), tl);
    ASSERT_LE(tl.size(), 5u);
    const TaskSpec e = ComputeTask(100, 10.0 + 60.0 * u(rng), 5.0, 5.0 + 10.0 + 60.0 * u(rng), 4);
    const PlanningContext ctx = f.Context(5.0);
    const auto best = MinimalVictims(e, ctx, tl);
    const Plan p = PlanEmergency(e, ctx, tl);
    if (!best) {
      EXPECT_EQ(p.unplaced.size(), 1u);
      continue;
    }
    ASSERT_TRUE(p.unplaced.empty()) << "trial " << trial;
    EXPECT_EQ(p.preempted.size(), *best) << "trial " << trial;
    with_victims += p.preempted.empty() ? 0 : 1;
    EXPECT_TRUE(AuditTimelines(tl).empty());
  }
  EXPECT_GT(with_victims, 30);
}

TEST(ReplanTest, AllStagesDoneMarksComplete) {
  FusionFixture f;
  const TaskSpec t = BuildFusionTask(3, 1, 0.0, 3600.0, 1.0, KnowledgeBase::Default());
  TerminatedTask term{&t, TaskProgress(5, StageProgress{true, 1, 10.0})};
  ResourceTimeline tl;
  const Plan p = ReplanTerminated({&term, 1}, f.Context(100.0), tl);
  EXPECT_TRUE(p.entries.empty());
  EXPECT_EQ(p.completed, std::vector<TaskId>{3});
}

TEST(ReplanTest, PreemptedAfterStageTwo) {
  FusionFixture f;
  const TaskSpec t = BuildFusionTask(3, 1, 0.0, 3600.0, 1.0, KnowledgeBase::Default());
  ResourceTimeline tl;
  const PlaceResult first = PlaceDag(t, f.Context(), tl);
  ASSERT_TRUE(first.ok);
  TaskProgress progress(5);
  for (int k = 0; k < 2; ++k) {
    progress[k] = {true, first.entries[k].OutputNode(), first.entries[k].end};
  }
  TerminatedTask term{&t, progress};
  const double now = first.entries[1].end + 5.0;
  const Plan p = ReplanTerminated({&term, 1}, f.Context(now), tl);
  ASSERT_EQ(p.entries.size(), 3u);
  EXPECT_EQ(p.entries[0].stage, 2);
  EXPECT_EQ(p.entries[1].stage, 3);
  EXPECT_EQ(p.entries[2].stage, 4);
  EXPECT_EQ(p.entries[0].node, progress[1].output_node);
  EXPECT_GE(p.entries[0].start, now);
  std::map<TaskId, TaskProgress> prog = {{3, progress}};
  std::vector<TaskSpec> tasks = {t};
  EXPECT_TRUE(AuditEntries(p.entries, tasks, f.plan, &prog).empty());
}

TEST(ReplanTest, PastDeadlineFails) {
  FusionFixture f;
  const TaskSpec t = BuildFusionTask(3, 1, 0.0, 600.0, 1.0, KnowledgeBase::Default());
  TerminatedTask term{&t, TaskProgress(5)};
  ResourceTimeline tl;
  const Plan p = ReplanTerminated({&term, 1}, f.Context(700.0), tl);
  ASSERT_EQ(p.unplaced.size(), 1u);
  EXPECT_EQ(p.unplaced[0].second, FailureReason::kDeadlineInfeasible);
}

TEST(ReplanTest, RandomPreemptionPointsRespectPrecedence) {
  std::mt19937_64 rng(8);
  int replanned = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = RandomAuditInstance(rng);
    ResourceTimeline tl;
    const TaskSpec& t = inst.tasks[0];
    const PlaceResult r = PlaceDag(t, inst.Context(), tl);
    if (!r.ok || r.entries.size() < 2) continue;
    const size_t cut = 1 + rng() % (r.entries.size() - 1);
    TaskProgress progress(t.stages.size());
    for (size_t k = 0; k < cut; ++k) {
      progress[r.entries[k].stage] = {true, r.entries[k].OutputNode(), r.entries[k].end};
    }
    TerminatedTask term{&t, progress};
    const Plan p = ReplanTerminated({&term, 1}, inst.Context(r.entries[cut - 1].end), tl);
    if (p.entries.empty()) continue;
    ++replanned;
    EXPECT_EQ(p.entries.size(), t.stages.size() - cut);
    std::map<TaskId, TaskProgress> prog = {{t.task_id, progress}};
    const auto audit = AuditEntries(p.entries, inst.tasks, inst.plan, &prog);
    EXPECT_TRUE(audit.empty()) << audit.front();
  }
  EXPECT_GT(replanned, 20);
}

ScheduleEntry FullNode(TaskId task, double start, double end, int priority) {
  ScheduleEntry e;
  e.task = task;
  e.priority = priority;
  e.node = 0;
  e.start = start;
  e.end = end;
  e.usages = {{NodeKey(0, Resource::kCompute), 5.0, 5.0}};
  return e;
}

TEST(ArbitrateTest, SingleProposalAdmitted) {
  ResourceTimeline tl;
  const std::vector<Proposal> props = {{2, 0.0, {FullNode(1, 0, 10, 2)}}};
  EXPECT_EQ(Arbitrate(props, tl), std::vector<size_t>{0});
}

TEST(ArbitrateTest, HigherPriorityWins) {
  ResourceTimeline tl;
  const std::vector<Proposal> props = {{2, 0.0, {FullNode(1, 0, 10, 2)}},
                                       {4, 5.0, {FullNode(2, 5, 15, 4)}}};
  EXPECT_EQ(Arbitrate(props, tl), std::vector<size_t>{1});
  EXPECT_EQ(tl.size(), 1u);
}

TEST(ArbitrateTest, RandomProposalSets) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Proposal> props;
    const int n = 2 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      Proposal p;
      p.priority = 1 + static_cast<int>(rng() % 4);
      p.timestamp = std::floor(10 * u(rng));
      const int m = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < m; ++k) {
        ScheduleEntry e;
        e.task = i;
        e.stage = k;
        e.start = std::floor(100 * u(rng));
        e.end = e.start + 1 + std::floor(30 * u(rng));
        e.usages = {{NodeKey(static_cast<NodeId>(rng() % 3), Resource::kCompute),
                     1.0 + std::floor(4 * u(rng)), 5.0}};
        p.entries.push_back(e);
      }
      props.push_back(p);
    }
    ResourceTimeline tl;
    const auto admitted = Arbitrate(props, tl);
    EXPECT_TRUE(AuditTimelines(tl).empty());
    std::set<size_t> in(admitted.begin(), admitted.end());
    // Each rejected proposal overflows some resource when stacked on the
    // admitted ones.
    for (size_t i = 0; i < props.size(); ++i) {
      if (in.count(i)) continue;
      ResourceTimeline stacked = tl;
      for (const ScheduleEntry& e : props[i].entries) {
        for (const Usage& us : e.usages) {
          stacked.Add(us.key, {e.start, e.end, us.amount, us.limit, e.task, e.stage, 1, 0});
        }
      }
      bool overflows = false;
      for (const ScheduleEntry& e : props[i].entries) {
        for (const Usage& us : e.usages) {
          if (stacked.PeakUsage(us.key, e.start, e.end) > us.limit + 1e-9) overflows = true;
        }
      }
      EXPECT_TRUE(overflows) << "trial " << trial << " proposal " << i;
    }
  }
}

TEST(PlanningCycleTest, Defaults) {
  EXPECT_EQ(PlanningCycle(3), 60.0);
  EXPECT_EQ(PlanningCycle(2), 180.0);
  EXPECT_EQ(PlanningCycle(1), 600.0);
  EXPECT_THROW(PlanningCycle(4), ValidationError);
  EXPECT_THROW(PlanningCycle(0), ValidationError);
}

TEST(PlanningCycleTest, ConfigValidation) {
  SchedulerConfig c;
  c.cycle_s = {100.0, 50.0, 10.0};
  EXPECT_NO_THROW(c.Validate());
  EXPECT_EQ(PlanningCycle(3, c), 10.0);
  c.cycle_s = {100.0, 100.0, 10.0};
  EXPECT_THROW(c.Validate(), ValidationError);
  c = {};
  c.headroom_fraction = 1.0;
  EXPECT_THROW(c.Validate(), ValidationError);
}

TEST(BruteForceTest, SingleFeasiblePlacement) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  const std::vector<TaskSpec> tasks = {ComputeTask(0, 5.0, 0.0, 1.0, 2)};
  const BruteForceResult r = BruteForcePlan(tasks, f.Context());
  EXPECT_EQ(r.weight, 2);
  EXPECT_EQ(r.placed, std::vector<TaskId>{0});
}

TEST(BruteForceTest, InfeasibleGivesEmptyPlan) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  const std::vector<TaskSpec> tasks = {ComputeTask(0, 50.0, 0.0, 5.0, 2)};
  const BruteForceResult r = BruteForcePlan(tasks, f.Context());
  EXPECT_EQ(r.weight, 0);
  EXPECT_TRUE(r.placed.empty());
}

TEST(BruteForceTest, RejectsLargeInstances) {
  FusionFixture f;
  const std::vector<TaskSpec> tasks(4, ComputeTask(0, 5.0, 0.0, 10.0));
  EXPECT_THROW(BruteForcePlan(tasks, f.Context()), ValidationError);
}

TEST(BruteForceTest, OptimumBeatsSequentialOrder) {
  // Greedy by priority places the long high-priority task first and leaves
  // no room; the optimum runs the two short tasks back to back instead.
  FusionFixture f;
  f.nodes = {Node(1.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  const std::vector<TaskSpec> tasks = {ComputeTask(0, 10.0, 0.0, 10.0, 3),
                                       ComputeTask(1, 5.0, 0.0, 5.0, 2),
                                       ComputeTask(2, 5.0, 0.0, 10.0, 2)};
  const BruteForceResult r = BruteForcePlan(tasks, f.Context());
  EXPECT_EQ(r.weight, 4);
  ResourceTimeline tl;
  const Plan p = PlanPeriodic(Pointers(tasks), f.Context(), tl);
  EXPECT_EQ(Weight(p, tasks), 3);
}

TEST(BruteForceTest, GreedyMatchesOptimumOnSingleTasks) {
  std::mt19937_64 rng(17);
  int feasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Instance inst = RandomTinyInstance(rng, 1, 1 + static_cast<int>(rng() % 3), 4);
    ResourceTimeline tl;
    const Plan p = PlanPeriodic(Pointers(inst.tasks), inst.Context(), tl);
    const BruteForceResult o = BruteForcePlan(inst.tasks, inst.Context());
    ASSERT_EQ(Weight(p, inst.tasks), o.weight) << "trial " << trial;
    feasible += o.weight > 0 ? 1 : 0;
  }
  EXPECT_GT(feasible, 60);
}

TEST(BruteForceTest, GreedyNeverExceedsOptimum) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = RandomTinyInstance(rng, 3, 2, 3);
    ResourceTimeline tl;
    const Plan p = PlanPeriodic(Pointers(inst.tasks), inst.Context(), tl);
    ASSERT_TRUE(AuditTimelines(tl).empty());
    ASSERT_TRUE(AuditEntries(p.entries, inst.tasks, inst.plan).empty());
    const BruteForceResult o = BruteForcePlan(inst.tasks, inst.Context());
    ASSERT_LE(Weight(p, inst.tasks), o.weight) << "trial " << trial;
  }
}

TEST(PlanCsvTest, Format) {
  FusionFixture f;
  f.nodes = {Node(5.0), Station()};
  f.plan = HandPlan(1, 1, {}, {});
  ResourceTimeline tl;
  const std::vector<TaskSpec> tasks = {ComputeTask(0, 5.0, 0.0, 100.0),
                                       ComputeTask(1, 5000.0, 0.0, 100.0)};
  const Plan p = PlanPeriodic(Pointers(tasks), f.Context(), tl);
  std::ostringstream out;
  WritePlanCsv(out, p.entries, p.unplaced);
  EXPECT_EQ(out.str(),
            "task_id,stage_id,node_id,resource,amount,start_s,end_s,status,fail_reason\n"
            "0,0,0,compute,5,0,1,planned,\n"
            "1,,,,,,,failed,deadline_infeasible\n");
}

TEST(FailureReasonTest, RoundTrip) {
  for (auto r : {FailureReason::kInsufficientResources, FailureReason::kNoWindow,
                 FailureReason::kDeadlineInfeasible, FailureReason::kPreempted,
                 FailureReason::kStaleViewConflict}) {
    EXPECT_EQ(ParseFailureReason(ToString(r)), r);
  }
  EXPECT_THROW(ParseFailureReason("bogus"), ValidationError);
}

}  // namespace
}  // namespace cnsc
