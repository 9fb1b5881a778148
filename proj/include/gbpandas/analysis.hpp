#pragma once

// Run metrics and the runtime checks derived from the stability argument:
// Lyapunov function, windowed drift, workload orthogonality and recursion,
// renewal rate of pseudo service.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "gbpandas/engine.hpp"
#include "gbpandas/state.hpp"

namespace gbp {

// V(Z) = ||W||^2 + ||Psi||_1.
inline double lyapunov(const SimState& state, std::span<const double> means) {
  double v = 0.0;
  for (ServerIndex m = 0; m < state.servers(); ++m) {
    const double w = workload(state, m, means);
    v += w * w + static_cast<double>(state.server(m).psi);
  }
  return v;
}

// ||Q||_1 + ||Psi||_1, the size used to delimit the "small" state set.
inline double state_size(const SimState& state) {
  double s = static_cast<double>(state.total_waiting());
  for (ServerIndex m = 0; m < state.servers(); ++m) s += static_cast<double>(state.server(m).psi);
  return s;
}

// V(t + window) - V(t) for every t with t + window inside the series.
inline std::vector<double> drift_estimate(std::span<const double> v, std::size_t window) {
  if (window == 0 || window >= v.size()) throw std::domain_error("drift window must be in [1, series length)");
  std::vector<double> out(v.size() - window);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = v[t + window] - v[t];
  return out;
}

// Mean windowed drift over the start states whose size exceeds `threshold`;
// empty when no such state exists.
inline std::optional<double> restricted_mean_drift(std::span<const double> v, std::span<const double> size,
                                                   std::size_t window, double threshold) {
  if (size.size() != v.size()) throw std::invalid_argument("state-size series must match the V series");
  const auto drifts = drift_estimate(v, window);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < drifts.size(); ++t) {
    if (size[t] > threshold) {
      sum += drifts[t];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

inline double least_squares_slope(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const double xbar = 0.5 * static_cast<double>(n - 1);
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxy += dx * (y[i] - ybar);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

enum class Stability { stable, unstable };

inline std::string_view to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

struct StabilityOptions {
  double slope_threshold = 0.01;  // tasks per slot
  double growth_ratio = 2.0;      // final queue vs first-quartile average
};

// Queue-growth test on a total-queue-length series whose first `warmup`
// samples are discarded. Unstable iff the least-squares slope over the second
// half exceeds the threshold and the final value exceeds growth_ratio times
// the average of the first quarter.
inline Stability stability_verdict(std::span<const double> series, std::size_t warmup,
                                   const StabilityOptions& opt = {}) {
  if (warmup >= series.size()) throw std::domain_error("series is not longer than the warmup");
  const auto kept = series.subspan(warmup);
  const std::size_t n = kept.size();
  const double slope = least_squares_slope(kept.subspan(n / 2));
  const std::size_t quarter = std::max<std::size_t>(1, n / 4);
  double q1 = 0.0;
  for (std::size_t i = 0; i < quarter; ++i) q1 += kept[i];
  q1 /= static_cast<double>(quarter);
  const bool growing = slope > opt.slope_threshold && kept.back() > opt.growth_ratio * q1;
  return growing ? Stability::unstable : Stability::stable;
}

// (1/T) sum_t S_m(t) over the given ledgers.
inline double renewal_rate_check(std::span<const SlotLedger> ledgers, ServerIndex m, std::span<const double> means) {
  if (ledgers.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& l : ledgers) {
    for (Level n = 1; n <= l.levels; ++n) {
      sum += static_cast<double>(l.services[l.index(m, n)]) * means[static_cast<std::size_t>(n - 1)];
    }
  }
  return sum / static_cast<double>(ledgers.size());
}

// Streaming form of renewal_rate_check for every server at once.
class RenewalMeter {
 public:
  void add(const SlotLedger& ledger) {
    if (totals_.empty()) totals_.assign(ledger.servers, 0.0);
    for (ServerIndex m = 0; m < ledger.servers; ++m) totals_[m] += ledger.pseudo.service[m];
    ++slots_;
  }

  std::size_t slots() const { return slots_; }

  std::vector<double> rates() const {
    std::vector<double> r(totals_.size(), 0.0);
    if (slots_ == 0) return r;
    for (std::size_t m = 0; m < r.size(); ++m) r[m] = totals_[m] / static_cast<double>(slots_);
    return r;
  }

 private:
  std::vector<double> totals_;
  std::size_t slots_ = 0;
};

// Per-slot invariant checks. Residuals are maxima over the run, never means.
class InvariantMonitor {
 public:
  struct Summary {
    double max_orthogonality = 0.0;     // max_t |<W(t), U~(t)>|
    double max_recursion_residual = 0.0;
    std::uint64_t queue_balance_violations = 0;
    std::uint64_t psi_violations = 0;
    std::uint64_t status_violations = 0;
    std::uint64_t preemption_violations = 0;
    std::uint64_t conservation_violations = 0;
    std::uint64_t completion_violations = 0;
    std::uint64_t slots = 0;

    bool clean() const {
      return max_orthogonality == 0.0 && max_recursion_residual <= 1e-9 && queue_balance_violations == 0 &&
             psi_violations == 0 && status_violations == 0 && preemption_violations == 0 &&
             conservation_violations == 0 && completion_violations == 0;
    }
  };

  explicit InvariantMonitor(const SimState& initial) { remember(initial); }

  void observe(const StepOutcome& step, const SimState& after) {
    const SlotLedger& l = step.ledger;
    ++s_.slots;

    double orth = 0.0;
    for (ServerIndex m = 0; m < l.servers; ++m) orth += l.workload_before[m] * l.pseudo.unused[m];
    s_.max_orthogonality = std::max(s_.max_orthogonality, std::abs(orth));

    for (ServerIndex m = 0; m < l.servers; ++m) {
      const double predicted = l.workload_before[m] + l.pseudo.arrival[m] - l.pseudo.service[m] + l.pseudo.unused[m];
      s_.max_recursion_residual = std::max(s_.max_recursion_residual, std::abs(l.workload_after[m] - predicted));
      for (Level n = 1; n <= l.levels; ++n) {
        const std::size_t i = l.index(m, n);
        std::int64_t next = l.queue_before[i] + l.arrivals[i] - l.services[i];
        if (n == l.levels) next += l.unused[m];
        if (next != static_cast<std::int64_t>(after.queue_length(m, n))) ++s_.queue_balance_violations;
      }
    }

    for (ServerIndex m = 0; m < after.servers(); ++m) {
      const ServerStatus& st = after.server(m);
      if (st.psi > prev_psi_[m] + 1) ++s_.psi_violations;
      const bool idle = st.f == kIdle;
      if (idle != !st.busy() || (idle && st.psi != 0) || (!idle && st.eta != st.f)) ++s_.status_violations;
      if (st.busy()) {
        const bool same_task = prev_busy_[m] && prev_task_[m] == st.in_service->id;
        if (same_task && st.f != prev_f_[m]) ++s_.preemption_violations;
        // A task started this slot had Psi = 0 at its start.
        if (!same_task && st.psi != 1) ++s_.psi_violations;
      }
    }

    if (after.arrived != after.total_waiting() + after.in_service_count() + after.completed) {
      ++s_.conservation_violations;
    }
    for (const Task& task : step.completed) {
      if (task.completion_slot - task.arrival_slot < task.duration ||
          task.completion_slot - task.start_slot != task.duration) {
        ++s_.completion_violations;
      }
    }
    remember(after);
  }

  const Summary& summary() const { return s_; }

 private:
  void remember(const SimState& s) {
    const std::size_t m = s.servers();
    prev_psi_.resize(m);
    prev_f_.resize(m);
    prev_busy_.resize(m);
    prev_task_.resize(m);
    for (ServerIndex k = 0; k < m; ++k) {
      const ServerStatus& st = s.server(k);
      prev_psi_[k] = st.psi;
      prev_f_[k] = st.f;
      prev_busy_[k] = st.busy();
      prev_task_[k] = st.busy() ? st.in_service->id : 0;
    }
  }

  Summary s_;
  std::vector<std::int64_t> prev_psi_;
  std::vector<Level> prev_f_;
  std::vector<bool> prev_busy_;
  std::vector<std::uint64_t> prev_task_;
};

// Arrival-to-departure times of completed tasks.
class CompletionStats {
 public:
  void add(std::int64_t sojourn) { samples_.push_back(static_cast<double>(sojourn)); }
  std::size_t count() const { return samples_.size(); }

  double mean() const {
    if (samples_.empty()) return std::nan("");
    double s = 0.0;
    for (double v : samples_) s += v;
    return s / static_cast<double>(samples_.size());
  }

  // Nearest-rank quantile, p in (0, 1].
  double quantile(double p) const {
    if (samples_.empty()) return std::nan("");
    std::vector<double> copy = samples_;
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(copy.size())));
    rank = std::clamp<std::size_t>(rank, 1, copy.size()) - 1;
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(rank), copy.end());
    return copy[rank];
  }

 private:
  std::vector<double> samples_;
};

struct RunMetrics {
  double mean_completion_time = 0.0;
  double p95_completion = 0.0;
  double p99_completion = 0.0;
  double time_avg_total_queue = 0.0;
  std::vector<double> time_avg_workload;
  bool unstable = false;
  std::uint64_t completed_count = 0;
  std::uint64_t arrived_count = 0;
  std::uint64_t stranded_count = 0;
};

struct DiagnosticsReport {
  InvariantMonitor::Summary invariants;
  std::vector<double> renewal_rate;  // per server, post-warmup
  std::size_t drift_window = 0;
  std::optional<double> restricted_drift;
  double mean_lyapunov = 0.0;
  double final_lyapunov = 0.0;
};

}  // namespace gbp
