#include <gtest/gtest.h>

#include <cmath>

#include "gbpandas/policies.hpp"

using namespace gbp;

namespace {

Task task_of(TypeIndex type, std::uint64_t id = 0) {
  Task t;
  t.id = id;
  t.type = type;
  return t;
}

// Holds the storage a PolicyView points into.
struct ViewFixture {
  ViewFixture(LocalityTable t, std::vector<double> mu) : table(std::move(t)), means(std::move(mu)), state(table.servers(), table.levels()) {}

  PolicyView view() {
    workload.resize(state.servers());
    lengths.resize(state.servers());
    for (ServerIndex m = 0; m < state.servers(); ++m) {
      if (!workload_override.empty()) {
        workload[m] = workload_override[m];
      } else {
        workload[m] = gbp::workload(state, m, means);
      }
      lengths[m] = state.queue_total(m);
    }
    return PolicyView{state, table, means, workload, lengths};
  }

  void fill(ServerIndex m, Level n, std::size_t count, TypeIndex type) {
    for (std::size_t i = 0; i < count; ++i) state.queue(m, n).push_back(task_of(type));
  }

  LocalityTable table;
  std::vector<double> means;
  SimState state;
  std::vector<double> workload_override;
  std::vector<double> workload;
  std::vector<std::size_t> lengths;
};

}  // namespace

TEST(GbPandasRoute, WeightedArgmin) {
  // M=3, N=2, type local to server 1 only, W = (4, 1, 10).
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({0})}), {1.0, 2.0});
  f.workload_override = {4, 1, 10};
  GbPandasPolicy p;
  Rng rng(1);
  const auto v = f.view();
  EXPECT_EQ(p.route(v, 0, rng).server, ServerIndex{1});
  EXPECT_EQ(min_weighted_workload(v, 0), 2.0);
}

TEST(GbPandasRoute, ZeroWorkloadLocalServerPreferred) {
  // Every server is idle: the task must go to a 1-local server.
  ViewFixture f(LocalityTable(ClusterTopology({2, 3}), {TaskType({1, 4})}), {1.0, 2.0, 4.0});
  GbPandasPolicy p;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto m = *p.route(f.view(), 0, rng).server;
    EXPECT_TRUE(m == 1 || m == 4);
  }
}

TEST(GbPandasRoute, UniformAmongEqualLocals) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({0, 1, 2})}), {1.0, 2.0});
  f.workload_override = {5, 5, 5};
  GbPandasPolicy p;
  Rng rng(12);
  const auto v = f.view();
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[*p.route(v, 0, rng).server];
  const double sd = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (int c : counts) EXPECT_NEAR(c, n / 3.0, 3 * sd);
}

TEST(GbPandasRoute, ScalingInvariance) {
  ViewFixture f(LocalityTable(ClusterTopology({2, 2}), {TaskType({0})}), {1.0, 2.0, 3.0});
  GbPandasPolicy p;
  f.workload_override = {6, 2, 2, 1};
  const auto v1 = f.view();
  Rng r1(3);
  const auto a = *p.route(v1, 0, r1).server;
  f.workload_override = {18, 6, 6, 3};
  const auto v2 = f.view();
  Rng r2(3);
  EXPECT_EQ(*p.route(v2, 0, r2).server, a);
}

TEST(GbPandasRoute, NeverExceedsMinimum) {
  ViewFixture f(LocalityTable::all_types(ClusterTopology({2, 3}), 2), {1.0, 1.5, 4.0});
  GbPandasPolicy p;
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    f.workload_override.assign(6, 0.0);
    for (double& w : f.workload_override) w = static_cast<double>(rng.below(4));
    const auto v = f.view();
    const TypeIndex type = rng.below(f.table.type_count());
    const ServerIndex m = *p.route(v, type, rng).server;
    EXPECT_EQ(v.routing_workload[m] * f.means[f.table.level(type, m) - 1], min_weighted_workload(v, type));
  }
}

TEST(GbPandasSchedule, SmallestNonemptyLevel) {
  ViewFixture f(LocalityTable(ClusterTopology({2, 2, 3}), {TaskType({0})}), {1.0, 10.0 / 9.0, 5.0 / 3.0, 4.0});
  GbPandasPolicy p;
  Rng rng(1);
  f.fill(0, 2, 3, 0);
  f.fill(0, 3, 1, 0);
  auto d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.kind, ScheduleDecision::Kind::own);
  EXPECT_EQ(d.level, 2);
  f.fill(0, 1, 1, 0);
  f.fill(0, 4, 9, 0);
  d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.level, 1);
}

TEST(GbPandasSchedule, IdleWhenEmptyAndNeverPulls) {
  ViewFixture f(LocalityTable(ClusterTopology({2, 2, 3}), {TaskType({0})}), {1.0, 10.0 / 9.0, 5.0 / 3.0, 4.0});
  GbPandasPolicy p;
  Rng rng(1);
  f.fill(1, 1, 5, 0);
  EXPECT_EQ(p.schedule(f.view(), 0, rng).kind, ScheduleDecision::Kind::idle);
}

TEST(JsqMaxWeight, RoutesToShortestLocal) {
  // Locals {1,2,3}; total queues (5,2,7,0): server 4's empty queue is not local.
  ViewFixture f(LocalityTable(ClusterTopology({4}), {TaskType({0, 1, 2})}), {1.0, 2.0});
  f.fill(0, 1, 5, 0);
  f.fill(1, 1, 2, 0);
  f.fill(2, 1, 7, 0);
  JsqMaxWeightPolicy p;
  Rng rng(1);
  EXPECT_EQ(p.route(f.view(), 0, rng).server, ServerIndex{1});
}

TEST(JsqMaxWeight, ServesOwnQueueWhenAlone) {
  ViewFixture f(LocalityTable(ClusterTopology({4}), {TaskType({0})}), {1.0, 2.0});
  f.fill(0, 1, 2, 0);
  JsqMaxWeightPolicy p;
  Rng rng(1);
  const auto d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.kind, ScheduleDecision::Kind::own);
  EXPECT_EQ(d.level, 1);
}

TEST(JsqMaxWeight, WeightsByServiceRate) {
  // Candidate queues at servers 2 (10 tasks, head 4-local to server 1) and
  // 3 (4 tasks, head 1-local to server 1). Weights 10/4 vs 4/1.
  const ClusterTopology topo({2, 2, 3});
  const LocalityTable table(topo, {TaskType({11}), TaskType({0, 2})});
  ViewFixture f(table, {1.0, 10.0 / 9.0, 5.0 / 3.0, 4.0});
  f.fill(1, 1, 10, 0);
  f.fill(2, 1, 4, 1);
  JsqMaxWeightPolicy p;
  Rng rng(1);
  const auto d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.kind, ScheduleDecision::Kind::pull);
  EXPECT_EQ(d.source, ServerIndex{2});
}

TEST(JsqMaxWeight, IdleWhenNothingWaits) {
  ViewFixture f(LocalityTable(ClusterTopology({4}), {TaskType({0})}), {1.0, 2.0});
  f.state.serving(2, 1) = 1;
  JsqMaxWeightPolicy p;
  Rng rng(1);
  EXPECT_EQ(p.schedule(f.view(), 0, rng).kind, ScheduleDecision::Kind::idle);
}

TEST(JsqPriority, OwnQueueFirst) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({1})}), {1.0, 2.0});
  f.fill(0, 2, 1, 0);
  f.fill(1, 1, 9, 0);
  JsqPriorityPolicy p;
  Rng rng(1);
  const auto d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.kind, ScheduleDecision::Kind::own);
  EXPECT_EQ(d.level, 2);
}

TEST(JsqPriority, HelpsLongestQueue) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({1})}), {1.0, 2.0});
  f.fill(1, 1, 9, 0);
  f.fill(2, 2, 2, 0);
  JsqPriorityPolicy p;
  Rng rng(1);
  const auto d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.kind, ScheduleDecision::Kind::pull);
  EXPECT_EQ(d.source, ServerIndex{1});
  EXPECT_EQ(d.level, 1);
}

TEST(JsqPriority, IdleWhenAllEmpty) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({1})}), {1.0, 2.0});
  JsqPriorityPolicy p;
  Rng rng(1);
  EXPECT_EQ(p.schedule(f.view(), 0, rng).kind, ScheduleDecision::Kind::idle);
}

TEST(Fcfs, HeadTaskLocal) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({0}), TaskType({1})}), {1.0, 2.0});
  f.state.global_queue().push_back(task_of(0));
  f.state.global_queue().push_back(task_of(1));
  FcfsPolicy p;
  Rng rng(1);
  const auto d = p.schedule(f.view(), 0, rng);
  EXPECT_EQ(d.kind, ScheduleDecision::Kind::global);
  EXPECT_EQ(d.position, 0u);
}

TEST(Fcfs, SkipsToFirstLocalTask) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({0}), TaskType({1})}), {1.0, 2.0});
  f.state.global_queue().push_back(task_of(1));
  f.state.global_queue().push_back(task_of(0));
  FcfsPolicy p;
  Rng rng(1);
  EXPECT_EQ(p.schedule(f.view(), 0, rng).position, 1u);
  // A scan depth of one only looks at the head.
  FcfsPolicy shallow(1);
  EXPECT_EQ(shallow.schedule(f.view(), 0, rng).position, 0u);
}

TEST(Fcfs, EmptyQueueIdles) {
  ViewFixture f(LocalityTable(ClusterTopology({3}), {TaskType({0})}), {1.0, 2.0});
  FcfsPolicy p;
  Rng rng(1);
  EXPECT_EQ(p.schedule(f.view(), 0, rng).kind, ScheduleDecision::Kind::idle);
  EXPECT_FALSE(p.route(f.view(), 0, rng).server.has_value());
}

TEST(Factory, KnownAndUnknownNames) {
  for (const auto& name : kPolicyNames) EXPECT_EQ(make_policy(name)->name(), name);
  EXPECT_THROW(make_policy("round-robin"), ConfigError);
}
