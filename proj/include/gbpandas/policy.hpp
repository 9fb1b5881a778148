#pragma once

// Routing + scheduling contract between the engine and a load-balancing
// policy. Policies only read the view; the engine applies their decisions.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "gbpandas/rng.hpp"
#include "gbpandas/state.hpp"
#include "gbpandas/topology.hpp"

namespace gbp {

struct PolicyView {
  const SimState& state;
  const LocalityTable& table;
  std::span<const double> means;
  // W_m and sum_n Q_m^n for every server, kept current while the slot's
  // arrivals are routed.
  std::span<const double> routing_workload;
  std::span<const std::size_t> routing_queue;
};

// Target of a routed task; no server means the shared FIFO queue.
struct RouteTarget {
  std::optional<ServerIndex> server;

  static RouteTarget to(ServerIndex m) { return {m}; }
  static RouteTarget global() { return {std::nullopt}; }
};

struct ScheduleDecision {
  enum class Kind { idle, own, pull, global };

  Kind kind = Kind::idle;
  // own/pull: server and sub-queue level whose head task starts service.
  ServerIndex source = 0;
  Level level = 0;
  // global: position in the shared FIFO queue.
  std::size_t position = 0;

  static ScheduleDecision idle() { return {}; }
  static ScheduleDecision own(ServerIndex m, Level n) { return {Kind::own, m, n, 0}; }
  static ScheduleDecision pull(ServerIndex from, Level n) { return {Kind::pull, from, n, 0}; }
  static ScheduleDecision from_global(std::size_t pos) { return {Kind::global, 0, 0, pos}; }
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string_view name() const = 0;
  virtual RouteTarget route(const PolicyView& view, TypeIndex type, Rng& rng) const = 0;
  // Called for each idle server m during the scheduling phase.
  virtual ScheduleDecision schedule(const PolicyView& view, ServerIndex m, Rng& rng) const = 0;
};

}  // namespace gbp
