#pragma once

// Discrete-time engine. One call to step() advances the state by one slot in
// four phases:
//   1. arrivals are routed one at a time and appended to their sub-queue;
//   2. servers whose task has used up its drawn duration complete it;
//   3. every idle server asks the policy what to serve next; a started task
//      draws its duration at the serving level and Psi restarts at 0;
//   4. Psi grows by one on every busy server and t advances.
// A task stays in Q_m^n while it is served and leaves at completion, so
// S_m^n(t) is the number of completions of tasks taken from Q_m^n. Each
// routing decision sees the tasks routed before it in the same slot.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbpandas/errors.hpp"
#include "gbpandas/policy.hpp"
#include "gbpandas/rng.hpp"
#include "gbpandas/state.hpp"
#include "gbpandas/stochastic.hpp"
#include "gbpandas/topology.hpp"

namespace gbp {

// Line-delimited JSON event records.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(out) {}

  void record(std::int64_t t, std::string_view event, const Task* task, const LocalityTable& table,
              std::optional<ServerIndex> server, Level level) {
    out_ << "{\"t\":" << t << ",\"event\":\"" << event << "\",\"task_id\":";
    if (task) {
      out_ << task->id << ",\"type\":[";
      const auto locals = table.type(task->type).locals();
      for (std::size_t i = 0; i < locals.size(); ++i) out_ << (i ? "," : "") << locals[i] + 1;
      out_ << "]";
    } else {
      out_ << "null,\"type\":null";
    }
    out_ << ",\"server\":";
    if (server) {
      out_ << *server + 1;
    } else {
      out_ << "null";
    }
    out_ << ",\"level\":";
    if (level > 0) {
      out_ << level;
    } else {
      out_ << "null";
    }
    out_ << "}\n";
  }

 private:
  std::ostream& out_;
};

struct StepOutcome {
  SlotLedger ledger;
  std::vector<Task> completed;
};

class Engine {
 public:
  Engine(LocalityTable table, ServiceModel service)
      : table_(std::move(table)), service_(std::move(service)) {
    if (service_.levels() != table_.levels()) {
      throw ConfigError("service model has " + std::to_string(service_.levels()) +
                        " levels but the topology has " + std::to_string(table_.levels()));
    }
    means_.assign(service_.effective_means().begin(), service_.effective_means().end());
  }

  const LocalityTable& table() const { return table_; }
  const ServiceModel& service() const { return service_; }
  std::span<const double> means() const { return means_; }

  SimState initial_state() const { return SimState(table_.servers(), table_.levels()); }

  StepOutcome step(SimState& state, const Policy& policy, std::span<const TypeIndex> arrivals, Rng& rng,
                   TraceWriter* trace = nullptr) {
    StepOutcome out;
    step(state, policy, arrivals, rng, out, trace);
    return out;
  }

  // Same as above, reusing the buffers in `out`.
  void step(SimState& state, const Policy& policy, std::span<const TypeIndex> arrivals, Rng& rng,
            StepOutcome& out, TraceWriter* trace = nullptr) {
    const std::size_t servers = state.servers();
    const int levels = state.levels();
    SlotLedger& ledger = out.ledger;
    ledger.reset(servers, levels);
    out.completed.clear();

    routing_workload_.resize(servers);
    routing_queue_.resize(servers);
    for (ServerIndex m = 0; m < servers; ++m) {
      for (Level n = 1; n <= levels; ++n) {
        ledger.queue_before[ledger.index(m, n)] = static_cast<std::int64_t>(state.queue_length(m, n));
      }
      routing_workload_[m] = workload(state, m, means_);
      routing_queue_[m] = state.queue_total(m);
      ledger.workload_before[m] = routing_workload_[m];
    }
    const PolicyView view{state, table_, means_, routing_workload_, routing_queue_};

    // 1. arrivals
    for (TypeIndex type : arrivals) {
      if (type >= table_.type_count()) throw std::out_of_range("arrival has unknown task type");
      Task task;
      task.id = state.next_task_id++;
      task.type = type;
      task.arrival_slot = state.t;
      ++state.arrived;
      if (trace) trace->record(state.t, "arrive", &task, table_, std::nullopt, 0);
      const RouteTarget target = policy.route(view, type, rng);
      if (target.server) {
        const ServerIndex m = *target.server;
        if (m >= servers) {
          throw PolicyContractError(std::string(policy.name()) + " routed to server " + std::to_string(m) +
                                    " of " + std::to_string(servers));
        }
        const Level n = table_.level(type, m);
        task.routed_server = m;
        task.routed_level = n;
        ++ledger.arrivals[ledger.index(m, n)];
        if (trace) trace->record(state.t, "route", &task, table_, m, n);
        state.queue(m, n).push_back(task);
        routing_workload_[m] = workload(state, m, means_);
        ++routing_queue_[m];
      } else {
        if (trace) trace->record(state.t, "route", &task, table_, std::nullopt, 0);
        state.global_queue().push_back(task);
      }
    }

    // 2. completions
    for (ServerIndex m = 0; m < servers; ++m) {
      ServerStatus& st = state.server(m);
      if (!st.busy() || st.remaining > 0) continue;
      Task done = std::move(*st.in_service);
      st.in_service.reset();
      done.completion_slot = state.t;
      if (done.routed_server) {
        --state.serving(*done.routed_server, done.routed_level);
        ++ledger.services[ledger.index(*done.routed_server, done.routed_level)];
      }
      st.f = kIdle;
      st.eta = kIdle;
      st.psi = 0;
      ++state.completed;
      if (trace) trace->record(state.t, "complete", &done, table_, m, done.served_level);
      out.completed.push_back(std::move(done));
    }

    // 3. scheduling
    for (ServerIndex m = 0; m < servers; ++m) {
      ServerStatus& st = state.server(m);
      if (st.busy()) continue;
      const ScheduleDecision decision = policy.schedule(view, m, rng);
      if (decision.kind == ScheduleDecision::Kind::idle) {
        if (trace) trace->record(state.t, "idle_unused", nullptr, table_, m, 0);
        continue;
      }
      Task task = take_task(state, policy, m, decision);
      const Level served = table_.level(task.type, m);
      task.served_server = m;
      task.served_level = served;
      task.start_slot = state.t;
      task.duration = service_.sample(served, rng);
      st.remaining = task.duration;
      st.psi = 0;
      st.f = served;
      st.eta = served;
      if (trace) trace->record(state.t, "start", &task, table_, m, served);
      st.in_service = std::move(task);
    }

    // 4. time advances
    for (ServerIndex m = 0; m < servers; ++m) {
      ServerStatus& st = state.server(m);
      if (!st.busy()) continue;
      ++st.psi;
      --st.remaining;
    }
    ++state.t;

    for (ServerIndex m = 0; m < servers; ++m) {
      const std::size_t last = ledger.index(m, levels);
      ledger.unused[m] =
          std::max<std::int64_t>(0, ledger.services[last] - ledger.arrivals[last] - ledger.queue_before[last]);
      ledger.workload_after[m] = workload(state, m, means_);
    }
    ledger.pseudo = pseudo_quantities(ledger, means_);
  }

 private:
  Task take_task(SimState& state, const Policy& policy, ServerIndex m, const ScheduleDecision& d) const {
    using Kind = ScheduleDecision::Kind;
    auto violation = [&](const std::string& what) {
      return PolicyContractError(std::string(policy.name()) + ": " + what + " (server " + std::to_string(m) +
                                 ", slot " + std::to_string(state.t) + ")");
    };
    if (d.kind == Kind::global) {
      auto& q = state.global_queue();
      if (d.position >= q.size()) throw violation("global queue position out of range");
      Task task = std::move(q[d.position]);
      q.erase(q.begin() + static_cast<std::ptrdiff_t>(d.position));
      return task;
    }
    const ServerIndex source = d.kind == Kind::own ? m : d.source;
    if (d.kind == Kind::own && d.source != m) throw violation("own-queue decision names another server");
    if (source >= state.servers()) throw violation("schedule names an out-of-range server");
    if (d.level < 1 || d.level > state.levels()) throw violation("schedule names an out-of-range level");
    auto& q = state.queue(source, d.level);
    if (q.empty()) throw violation("schedule selected an empty sub-queue");
    Task task = std::move(q.front());
    q.pop_front();
    ++state.serving(source, d.level);
    return task;
  }

  LocalityTable table_;
  ServiceModel service_;
  std::vector<double> means_;
  // Routing-view buffers; an Engine drives one replication at a time.
  std::vector<double> routing_workload_;
  std::vector<std::size_t> routing_queue_;
};

}  // namespace gbp
