#pragma once

// Markov state Z(t) = (Q, eta, Psi) of the simulated cluster, plus the
// per-slot ledger of arrival/service counts.
//
// The deques hold waiting tasks. Q_m^n additionally counts the tasks in
// service that were taken from that sub-queue; they leave Q_m^n when their
// service completes.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "gbpandas/topology.hpp"

namespace gbp {

inline constexpr Level kIdle = -1;

struct Task {
  std::uint64_t id = 0;
  TypeIndex type = 0;
  std::int64_t arrival_slot = 0;
  // Empty for tasks held in the FCFS global queue.
  std::optional<ServerIndex> routed_server;
  Level routed_level = 0;
  ServerIndex served_server = 0;
  Level served_level = 0;
  std::int64_t start_slot = -1;
  std::int64_t duration = 0;
  std::int64_t completion_slot = -1;
};

struct ServerStatus {
  Level eta = kIdle;  // scheduling decision
  Level f = kIdle;    // working status: level of the in-service task, or kIdle
  std::int64_t psi = 0;
  std::int64_t remaining = 0;
  std::optional<Task> in_service;

  bool busy() const { return in_service.has_value(); }
};

class SimState {
 public:
  SimState(std::size_t servers, int levels)
      : servers_(servers), levels_(levels), queues_(servers * static_cast<std::size_t>(levels)),
        serving_(servers * static_cast<std::size_t>(levels), 0), status_(servers) {}

  std::int64_t t = 0;

  std::size_t servers() const { return servers_; }
  int levels() const { return levels_; }

  std::deque<Task>& queue(ServerIndex m, Level n) { return queues_[index(m, n)]; }
  const std::deque<Task>& queue(ServerIndex m, Level n) const { return queues_[index(m, n)]; }
  std::size_t waiting(ServerIndex m, Level n) const { return queues_[index(m, n)].size(); }
  // In-service tasks taken from Q_m^n.
  std::size_t serving(ServerIndex m, Level n) const { return serving_[index(m, n)]; }
  std::size_t& serving(ServerIndex m, Level n) { return serving_[index(m, n)]; }
  // Q_m^n(t).
  std::size_t queue_length(ServerIndex m, Level n) const { return waiting(m, n) + serving(m, n); }

  std::size_t waiting_at(ServerIndex m) const {
    std::size_t s = 0;
    for (Level n = 1; n <= levels_; ++n) s += waiting(m, n);
    return s;
  }

  // sum_n Q_m^n(t).
  std::size_t queue_total(ServerIndex m) const {
    std::size_t s = 0;
    for (Level n = 1; n <= levels_; ++n) s += queue_length(m, n);
    return s;
  }

  // Smallest level with a waiting task at m, or 0 when all are empty.
  Level first_nonempty_level(ServerIndex m) const {
    for (Level n = 1; n <= levels_; ++n) {
      if (waiting(m, n) > 0) return n;
    }
    return 0;
  }

  std::deque<Task>& global_queue() { return global_; }
  const std::deque<Task>& global_queue() const { return global_; }

  ServerStatus& server(ServerIndex m) { return status_[m]; }
  const ServerStatus& server(ServerIndex m) const { return status_[m]; }

  std::size_t total_waiting() const {
    std::size_t s = global_.size();
    for (const auto& q : queues_) s += q.size();
    return s;
  }

  std::size_t in_service_count() const {
    std::size_t s = 0;
    for (const auto& st : status_) s += st.busy() ? 1 : 0;
    return s;
  }

  std::uint64_t arrived = 0;
  std::uint64_t completed = 0;
  std::uint64_t next_task_id = 0;

 private:
  std::size_t index(ServerIndex m, Level n) const {
    return m * static_cast<std::size_t>(levels_) + static_cast<std::size_t>(n - 1);
  }

  std::size_t servers_;
  int levels_;
  std::vector<std::deque<Task>> queues_;
  std::vector<std::size_t> serving_;
  std::deque<Task> global_;
  std::vector<ServerStatus> status_;
};

// sum_n Q_m^n * mean_n.
inline double workload(const SimState& state, ServerIndex m, std::span<const double> means) {
  double w = 0.0;
  for (Level n = 1; n <= state.levels(); ++n) {
    w += static_cast<double>(state.queue_length(m, n)) * means[static_cast<std::size_t>(n - 1)];
  }
  return w;
}

inline std::vector<double> workloads(const SimState& state, std::span<const double> means) {
  std::vector<double> w(state.servers());
  for (ServerIndex m = 0; m < state.servers(); ++m) w[m] = workload(state, m, means);
  return w;
}

struct PseudoQuantities {
  std::vector<double> arrival;
  std::vector<double> service;
  std::vector<double> unused;
};

// Counts for one slot t. Per-(server, level) arrays are server-major.
struct SlotLedger {
  std::size_t servers = 0;
  int levels = 0;
  std::vector<std::int64_t> queue_before;  // Q_m^n(t)
  std::vector<std::int64_t> arrivals;      // A_m^n(t)
  std::vector<std::int64_t> services;      // S_m^n(t): service completions leaving Q_m^n
  std::vector<std::int64_t> unused;        // U_m(t)
  PseudoQuantities pseudo;
  std::vector<double> workload_before;  // W(t)
  std::vector<double> workload_after;   // W(t+1)

  void reset(std::size_t m, int n) {
    servers = m;
    levels = n;
    const std::size_t cells = m * static_cast<std::size_t>(n);
    queue_before.assign(cells, 0);
    arrivals.assign(cells, 0);
    services.assign(cells, 0);
    unused.assign(m, 0);
    workload_before.assign(m, 0.0);
    workload_after.assign(m, 0.0);
  }

  std::size_t index(ServerIndex m, Level n) const {
    return m * static_cast<std::size_t>(levels) + static_cast<std::size_t>(n - 1);
  }
};

// A_m = sum_n A_m^n mean_n, S_m = sum_n S_m^n mean_n, U~_m = U_m mean_N.
inline PseudoQuantities pseudo_quantities(const SlotLedger& ledger, std::span<const double> means) {
  PseudoQuantities p;
  p.arrival.assign(ledger.servers, 0.0);
  p.service.assign(ledger.servers, 0.0);
  p.unused.assign(ledger.servers, 0.0);
  const double last = means[static_cast<std::size_t>(ledger.levels - 1)];
  for (ServerIndex m = 0; m < ledger.servers; ++m) {
    for (Level n = 1; n <= ledger.levels; ++n) {
      const double mu = means[static_cast<std::size_t>(n - 1)];
      p.arrival[m] += static_cast<double>(ledger.arrivals[ledger.index(m, n)]) * mu;
      p.service[m] += static_cast<double>(ledger.services[ledger.index(m, n)]) * mu;
    }
    p.unused[m] = static_cast<double>(ledger.unused[m]) * last;
  }
  return p;
}

}  // namespace gbp
