#include <gtest/gtest.h>

#include <sstream>

#include "gbpandas/analysis.hpp"
#include "gbpandas/engine.hpp"
#include "gbpandas/policies.hpp"

using namespace gbp;

namespace {

const std::vector<double> kDeskMeans{1.0, 10.0 / 9.0, 5.0 / 3.0, 4.0};

Task waiting_task(std::uint64_t id, TypeIndex type) {
  Task t;
  t.id = id;
  t.type = type;
  return t;
}

// Single server, single level, every service takes one slot.
Engine unit_engine() {
  return Engine(LocalityTable(ClusterTopology(), {TaskType({0})}), ServiceModel(ServiceFamily::geometric, {1.0}));
}

// Routes everything to server 0 and asks for a sub-queue that may be empty.
class BrokenPolicy final : public Policy {
 public:
  enum class Fault { empty_queue, bad_route, bad_level, foreign_own };
  explicit BrokenPolicy(Fault f) : fault_(f) {}
  std::string_view name() const override { return "broken"; }
  RouteTarget route(const PolicyView&, TypeIndex, Rng&) const override {
    return RouteTarget::to(fault_ == Fault::bad_route ? 99 : 0);
  }
  ScheduleDecision schedule(const PolicyView&, ServerIndex m, Rng&) const override {
    switch (fault_) {
      case Fault::bad_level:
        return ScheduleDecision::own(m, 7);
      case Fault::foreign_own: {
        ScheduleDecision d = ScheduleDecision::own(m, 1);
        d.source = m + 1;
        return d;
      }
      default:
        return ScheduleDecision::own(m, 2);
    }
  }

 private:
  Fault fault_;
};

}  // namespace

TEST(Workload, EmptyIsZero) {
  SimState s(2, 4);
  EXPECT_EQ(workload(s, 0, kDeskMeans), 0.0);
}

TEST(Workload, WeightedSum) {
  SimState s(1, 4);
  const int counts[4] = {2, 1, 0, 3};
  for (Level n = 1; n <= 4; ++n) {
    for (int i = 0; i < counts[n - 1]; ++i) s.queue(0, n).push_back(waiting_task(0, 0));
  }
  EXPECT_NEAR(workload(s, 0, kDeskMeans), 2 + 10.0 / 9.0 + 12, 1e-12);
}

TEST(Workload, OneLocalTaskAddsMu1) {
  SimState s(1, 4);
  s.queue(0, 3).push_back(waiting_task(0, 0));
  const double before = workload(s, 0, kDeskMeans);
  s.queue(0, 1).push_back(waiting_task(1, 0));
  EXPECT_DOUBLE_EQ(workload(s, 0, kDeskMeans) - before, kDeskMeans[0]);
}

TEST(Workload, InServiceTaskCounts) {
  SimState s(1, 2);
  s.serving(0, 2) = 1;
  EXPECT_EQ(s.queue_length(0, 2), 1u);
  EXPECT_EQ(workload(s, 0, std::vector<double>{1, 3}), 3.0);
  EXPECT_EQ(s.total_waiting(), 0u);
}

TEST(Pseudo, AllZeroLedger) {
  SlotLedger l;
  l.reset(3, 4);
  const auto p = pseudo_quantities(l, kDeskMeans);
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_EQ(p.arrival[m], 0.0);
    EXPECT_EQ(p.service[m], 0.0);
    EXPECT_EQ(p.unused[m], 0.0);
  }
}

TEST(Pseudo, ArrivalWeighting) {
  SlotLedger l;
  l.reset(1, 4);
  l.arrivals[l.index(0, 1)] = 1;
  l.arrivals[l.index(0, 4)] = 1;
  l.unused[0] = 2;
  const auto p = pseudo_quantities(l, kDeskMeans);
  EXPECT_DOUBLE_EQ(p.arrival[0], 5.0);
  EXPECT_DOUBLE_EQ(p.unused[0], 8.0);
}

TEST(Engine, IdleSystemIsFixedPoint) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 2}), 2);
  Engine engine(table, ServiceModel(ServiceFamily::geometric, {1, 2, 3}));
  GbPandasPolicy policy;
  SimState s = engine.initial_state();
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const auto out = engine.step(s, policy, {}, rng);
    for (auto x : out.ledger.arrivals) EXPECT_EQ(x, 0);
    for (auto x : out.ledger.services) EXPECT_EQ(x, 0);
    for (auto x : out.ledger.unused) EXPECT_EQ(x, 0);
    for (auto x : out.ledger.workload_after) EXPECT_EQ(x, 0.0);
    EXPECT_TRUE(out.completed.empty());
  }
  EXPECT_EQ(s.t, 5);
  EXPECT_EQ(s.total_waiting(), 0u);
  for (ServerIndex m = 0; m < 4; ++m) EXPECT_FALSE(s.server(m).busy());
}

TEST(Engine, IdleServerBalancesRecursion) {
  Engine engine = unit_engine();
  GbPandasPolicy policy;
  SimState s = engine.initial_state();
  Rng rng(1);
  const auto out = engine.step(s, policy, {}, rng);
  EXPECT_EQ(s.queue_length(0, 1), 0u);
  EXPECT_EQ(out.ledger.unused[0], 0);
  EXPECT_EQ(out.ledger.workload_after[0],
            out.ledger.workload_before[0] + out.ledger.pseudo.arrival[0] - out.ledger.pseudo.service[0] +
                out.ledger.pseudo.unused[0]);
}

TEST(Engine, OneSlotServiceTrace) {
  Engine engine = unit_engine();
  GbPandasPolicy policy;
  SimState s = engine.initial_state();
  Rng rng(1);
  const std::vector<TypeIndex> one{0};

  auto out = engine.step(s, policy, one, rng);  // slot 0: arrive, start
  EXPECT_TRUE(out.completed.empty());
  EXPECT_EQ(out.ledger.arrivals[0], 1);
  EXPECT_EQ(s.queue_length(0, 1), 1u);  // in service
  EXPECT_EQ(s.server(0).psi, 1);
  EXPECT_EQ(s.server(0).f, 1);

  out = engine.step(s, policy, {}, rng);  // slot 1: completes
  ASSERT_EQ(out.completed.size(), 1u);
  EXPECT_EQ(out.completed[0].completion_slot, 1);
  EXPECT_EQ(out.completed[0].start_slot, 0);
  EXPECT_EQ(out.completed[0].duration, 1);
  EXPECT_EQ(out.ledger.services[0], 1);
  EXPECT_EQ(s.queue_length(0, 1), 0u);
  EXPECT_FALSE(s.server(0).busy());
  EXPECT_EQ(s.server(0).f, kIdle);
  EXPECT_EQ(s.server(0).psi, 0);
}

TEST(Engine, BackToBackServiceRestartsPsi) {
  Engine engine = unit_engine();
  GbPandasPolicy policy;
  SimState s = engine.initial_state();
  Rng rng(1);
  const std::vector<TypeIndex> two{0, 0};
  engine.step(s, policy, two, rng);
  EXPECT_EQ(s.waiting_at(0), 1u);
  const auto out = engine.step(s, policy, {}, rng);
  EXPECT_EQ(out.completed.size(), 1u);
  EXPECT_TRUE(s.server(0).busy());
  EXPECT_EQ(s.server(0).psi, 1);
  EXPECT_EQ(s.server(0).in_service->id, 1u);
}

TEST(Engine, RoutingSeesEarlierArrivalsOfTheSlot) {
  // Two servers, one type local to both: a batch of two must split.
  const LocalityTable table(ClusterTopology({2}), {TaskType({0, 1})});
  Engine engine(table, ServiceModel(ServiceFamily::geometric, {5.0, 6.0}));
  GbPandasPolicy policy;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimState s = engine.initial_state();
    Rng rng(seed);
    const std::vector<TypeIndex> batch{0, 0};
    engine.step(s, policy, batch, rng);
    EXPECT_EQ(s.queue_total(0), 1u);
    EXPECT_EQ(s.queue_total(1), 1u);
  }
}

TEST(Engine, LevelMismatchRejected) {
  const LocalityTable table(ClusterTopology({2}), {TaskType({0})});
  EXPECT_THROW(Engine(table, ServiceModel(ServiceFamily::geometric, {1.0})), ConfigError);
}

TEST(Engine, UnknownTypeRejected) {
  Engine engine = unit_engine();
  GbPandasPolicy policy;
  SimState s = engine.initial_state();
  Rng rng(1);
  const std::vector<TypeIndex> bad{3};
  EXPECT_THROW(engine.step(s, policy, bad, rng), std::out_of_range);
}

TEST(Engine, ContractViolations) {
  const LocalityTable table(ClusterTopology({2}), {TaskType({0})});
  Engine engine(table, ServiceModel(ServiceFamily::geometric, {1.0, 2.0}));
  const std::vector<TypeIndex> one{0};
  for (auto fault : {BrokenPolicy::Fault::empty_queue, BrokenPolicy::Fault::bad_route,
                     BrokenPolicy::Fault::bad_level, BrokenPolicy::Fault::foreign_own}) {
    BrokenPolicy policy(fault);
    SimState s = engine.initial_state();
    Rng rng(1);
    EXPECT_THROW(engine.step(s, policy, one, rng), PolicyContractError);
  }
}

TEST(Engine, SameSeedSameTrajectory) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 3}), 2);
  Engine engine(table, ServiceModel(ServiceFamily::lognormal, {1.0, 2.0, 4.0}));
  const auto arrivals = ArrivalModel::with_mean(2.0, Popularity::uniform(table.type_count()), 50);
  auto run = [&] {
    GbPandasPolicy policy;
    SimState s = engine.initial_state();
    Rng a(derive_seed(3, 1)), r(derive_seed(3, 2));
    std::vector<TypeIndex> batch;
    std::vector<std::int64_t> sig;
    for (int t = 0; t < 2000; ++t) {
      arrivals.sample(a, batch);
      for (const auto& task : engine.step(s, policy, batch, r).completed) sig.push_back(task.completion_slot * 131 + static_cast<std::int64_t>(task.id));
    }
    return sig;
  };
  EXPECT_EQ(run(), run());
}

TEST(Trace, RecordsLifecycle) {
  Engine engine = unit_engine();
  GbPandasPolicy policy;
  SimState s = engine.initial_state();
  Rng rng(1);
  std::ostringstream out;
  TraceWriter trace(out);
  const std::vector<TypeIndex> one{0};
  engine.step(s, policy, one, rng, &trace);
  engine.step(s, policy, {}, rng, &trace);
  const std::string expected =
      "{\"t\":0,\"event\":\"arrive\",\"task_id\":0,\"type\":[1],\"server\":null,\"level\":null}\n"
      "{\"t\":0,\"event\":\"route\",\"task_id\":0,\"type\":[1],\"server\":1,\"level\":1}\n"
      "{\"t\":0,\"event\":\"start\",\"task_id\":0,\"type\":[1],\"server\":1,\"level\":1}\n"
      "{\"t\":1,\"event\":\"complete\",\"task_id\":0,\"type\":[1],\"server\":1,\"level\":1}\n"
      "{\"t\":1,\"event\":\"idle_unused\",\"task_id\":null,\"type\":null,\"server\":1,\"level\":null}\n";
  EXPECT_EQ(out.str(), expected);
}

TEST(Monitor, CleanOnRealRun) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 2, 3}), 3);
  ServiceModel service(ServiceFamily::lognormal, kDeskMeans);
  const auto arrivals = ArrivalModel::with_mean(6.0, Popularity::uniform(table.type_count()), 100);
  for (const auto& name : kPolicyNames) {
    Engine engine(table, service);
    const auto policy = make_policy(name);
    SimState s = engine.initial_state();
    InvariantMonitor monitor(s);
    Rng a(1), r(2);
    std::vector<TypeIndex> batch;
    StepOutcome step;
    for (int t = 0; t < 5000; ++t) {
      arrivals.sample(a, batch);
      engine.step(s, *policy, batch, r, step);
      monitor.observe(step, s);
    }
    EXPECT_TRUE(monitor.summary().clean()) << name;
    EXPECT_EQ(monitor.summary().slots, 5000u);
  }
}
