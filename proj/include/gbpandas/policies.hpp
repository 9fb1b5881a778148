#pragma once

// GB-PANDAS and the three baselines (JSQ-MaxWeight, JSQ-Priority, FCFS).

#include <array>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gbpandas/errors.hpp"
#include "gbpandas/policy.hpp"

namespace gbp {

namespace detail {

// Collects indices tied at the current best value and picks one uniformly.
class TieBreaker {
 public:
  void offer(std::size_t index) { ties_.push_back(index); }
  void reset(std::size_t index) {
    ties_.clear();
    ties_.push_back(index);
  }
  bool empty() const { return ties_.empty(); }

  std::size_t pick(Rng& rng) const {
    if (ties_.size() == 1) return ties_.front();
    return ties_[static_cast<std::size_t>(rng.below(ties_.size()))];
  }

 private:
  std::vector<std::size_t> ties_;
};

inline double mean_at(std::span<const double> means, Level n) { return means[static_cast<std::size_t>(n - 1)]; }

// Level of the sub-queue holding server k's oldest-priority waiting task
// (smallest nonempty level), 0 if none.
inline Level head_level(const SimState& s, ServerIndex k) { return s.first_nonempty_level(k); }

// Picks a server among those with the shortest queue, restricted to the
// type's 1-local servers.
inline ServerIndex shortest_local_queue(const PolicyView& view, TypeIndex type, Rng& rng) {
  TieBreaker ties;
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (ServerIndex m : view.table.type(type).locals()) {
    const std::size_t q = view.routing_queue[m];
    if (q < best) {
      best = q;
      ties.reset(m);
    } else if (q == best) {
      ties.offer(m);
    }
  }
  return ties.pick(rng);
}

}  // namespace detail

// W*_L = min_m W_m * mean(level(L, m)): the smallest weighted workload a
// type-L task can join.
inline double min_weighted_workload(const PolicyView& view, TypeIndex type) {
  double best = std::numeric_limits<double>::infinity();
  const auto row = view.table.row(type);
  for (ServerIndex m = 0; m < row.size(); ++m) {
    best = std::min(best, view.routing_workload[m] * detail::mean_at(view.means, row[m]));
  }
  return best;
}

// Weighted-workload routing with prioritized scheduling of the server's own
// sub-queues.
class GbPandasPolicy final : public Policy {
 public:
  std::string_view name() const override { return "gb-pandas"; }

  RouteTarget route(const PolicyView& view, TypeIndex type, Rng& rng) const override {
    const auto row = view.table.row(type);
    double best = std::numeric_limits<double>::infinity();
    Level best_level = 0;
    detail::TieBreaker ties;
    for (ServerIndex m = 0; m < row.size(); ++m) {
      const double weighted = view.routing_workload[m] * detail::mean_at(view.means, row[m]);
      // Equal weighted workloads go to the most local server first.
      if (weighted < best || (weighted == best && row[m] < best_level)) {
        best = weighted;
        best_level = row[m];
        ties.reset(m);
      } else if (weighted == best && row[m] == best_level) {
        ties.offer(m);
      }
    }
    return RouteTarget::to(ties.pick(rng));
  }

  ScheduleDecision schedule(const PolicyView& view, ServerIndex m, Rng&) const override {
    const Level n = view.state.first_nonempty_level(m);
    return n == 0 ? ScheduleDecision::idle() : ScheduleDecision::own(m, n);
  }
};

// JSQ over the 1-local servers; an idle server serves the queue maximizing
// (queue length) * (service rate at which it would serve that queue's head).
// Queue lengths include the task in service; only queues with a waiting task
// are candidates.
class JsqMaxWeightPolicy final : public Policy {
 public:
  std::string_view name() const override { return "jsq-maxweight"; }

  RouteTarget route(const PolicyView& view, TypeIndex type, Rng& rng) const override {
    return RouteTarget::to(detail::shortest_local_queue(view, type, rng));
  }

  ScheduleDecision schedule(const PolicyView& view, ServerIndex m, Rng& rng) const override {
    const SimState& s = view.state;
    double best = 0.0;
    detail::TieBreaker ties;
    for (ServerIndex k = 0; k < s.servers(); ++k) {
      if (s.waiting_at(k) == 0) continue;
      const std::size_t len = s.queue_total(k);
      const Level hl = detail::head_level(s, k);
      const TypeIndex head = s.queue(k, hl).front().type;
      const double weight = static_cast<double>(len) / detail::mean_at(view.means, view.table.level(head, m));
      if (weight > best) {
        best = weight;
        ties.reset(k);
      } else if (weight == best) {
        ties.offer(k);
      }
    }
    if (ties.empty()) return ScheduleDecision::idle();
    const ServerIndex k = ties.pick(rng);
    const Level hl = detail::head_level(s, k);
    return k == m ? ScheduleDecision::own(m, hl) : ScheduleDecision::pull(k, hl);
  }
};

// JSQ over the 1-local servers; an idle server drains its own queue first and
// otherwise helps the longest queue in the system.
class JsqPriorityPolicy final : public Policy {
 public:
  std::string_view name() const override { return "jsq-priority"; }

  RouteTarget route(const PolicyView& view, TypeIndex type, Rng& rng) const override {
    return RouteTarget::to(detail::shortest_local_queue(view, type, rng));
  }

  ScheduleDecision schedule(const PolicyView& view, ServerIndex m, Rng& rng) const override {
    const SimState& s = view.state;
    if (const Level own = s.first_nonempty_level(m); own != 0) return ScheduleDecision::own(m, own);
    std::size_t best = 0;
    detail::TieBreaker ties;
    for (ServerIndex k = 0; k < s.servers(); ++k) {
      if (s.waiting_at(k) == 0) continue;
      const std::size_t len = s.queue_total(k);
      if (len > best) {
        best = len;
        ties.reset(k);
      } else if (len == best) {
        ties.offer(k);
      }
    }
    if (ties.empty()) return ScheduleDecision::idle();
    const ServerIndex k = ties.pick(rng);
    return ScheduleDecision::pull(k, detail::head_level(s, k));
  }
};

// One shared FIFO queue. An idle server takes the first task within the
// first `scan_depth` entries that is 1-local to it, else the head task.
// scan_depth == 0 scans the whole queue.
class FcfsPolicy final : public Policy {
 public:
  explicit FcfsPolicy(std::size_t scan_depth = 0) : scan_depth_(scan_depth) {}

  std::string_view name() const override { return "fcfs"; }
  std::size_t scan_depth() const { return scan_depth_; }

  RouteTarget route(const PolicyView&, TypeIndex, Rng&) const override { return RouteTarget::global(); }

  ScheduleDecision schedule(const PolicyView& view, ServerIndex m, Rng&) const override {
    const auto& q = view.state.global_queue();
    if (q.empty()) return ScheduleDecision::idle();
    const std::size_t limit = scan_depth_ == 0 ? q.size() : std::min(scan_depth_, q.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (view.table.level(q[i].type, m) == 1) return ScheduleDecision::from_global(i);
    }
    return ScheduleDecision::from_global(0);
  }

 private:
  std::size_t scan_depth_;
};

inline constexpr std::array<std::string_view, 4> kPolicyNames = {"gb-pandas", "jsq-maxweight", "jsq-priority",
                                                                 "fcfs"};

struct PolicyOptions {
  std::size_t fcfs_scan_depth = 0;
};

inline std::unique_ptr<Policy> make_policy(std::string_view name, const PolicyOptions& options = {}) {
  if (name == "gb-pandas") return std::make_unique<GbPandasPolicy>();
  if (name == "jsq-maxweight") return std::make_unique<JsqMaxWeightPolicy>();
  if (name == "jsq-priority") return std::make_unique<JsqPriorityPolicy>();
  if (name == "fcfs") return std::make_unique<FcfsPolicy>(options.fcfs_scan_depth);
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

}  // namespace gbp
