#pragma once

// Capacity region of the affinity-scheduling system.
//
// A rate vector is supportable iff it can be split across servers,
// lambda_L = sum_m lambda_{L,m}, so that every server's expected load
// sum_L lambda_{L,m} * mean(level(L, m)) stays below one. capacity_membership
// finds the split minimizing the largest load rho*; the vector is inside the
// region iff rho* < 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gbpandas/errors.hpp"
#include "gbpandas/simplex.hpp"
#include "gbpandas/stochastic.hpp"
#include "gbpandas/topology.hpp"

namespace gbp {

inline constexpr double kMembershipTolerance = 1e-9;

// lambda_{L,m}, stored type-major.
struct Decomposition {
  std::size_t types = 0;
  std::size_t servers = 0;
  std::vector<double> rate;

  Decomposition() = default;
  Decomposition(std::size_t l, std::size_t m) : types(l), servers(m), rate(l * m, 0.0) {}

  double& at(TypeIndex l, ServerIndex m) { return rate[l * servers + m]; }
  double at(TypeIndex l, ServerIndex m) const { return rate[l * servers + m]; }
};

// lambda_{L,n,m}: rate of type-L tasks attributed to its j-th local server
// n = locals[j] and served by m.
class RefinedDecomposition {
 public:
  RefinedDecomposition() = default;

  explicit RefinedDecomposition(const LocalityTable& table) : servers_(table.servers()) {
    offset_.reserve(table.type_count() + 1);
    offset_.push_back(0);
    for (const auto& type : table.types()) offset_.push_back(offset_.back() + type.replicas() * servers_);
    rate_.assign(offset_.back(), 0.0);
  }

  std::size_t types() const { return offset_.empty() ? 0 : offset_.size() - 1; }
  std::size_t servers() const { return servers_; }
  std::size_t replicas(TypeIndex l) const { return (offset_[l + 1] - offset_[l]) / servers_; }

  double& at(TypeIndex l, std::size_t j, ServerIndex m) { return rate_[offset_[l] + j * servers_ + m]; }
  double at(TypeIndex l, std::size_t j, ServerIndex m) const { return rate_[offset_[l] + j * servers_ + m]; }

  // sum_n lambda_{L,n,m}, accumulated in local-server order.
  double coarse(TypeIndex l, ServerIndex m) const {
    double s = 0.0;
    for (std::size_t j = 0; j < replicas(l); ++j) s += at(l, j, m);
    return s;
  }

 private:
  std::size_t servers_ = 0;
  std::vector<std::size_t> offset_;
  std::vector<double> rate_;
};

struct CapacityResult {
  double rho_star = 0.0;
  bool feasible = true;
  // 1/rho* - 1; infinite when rho* == 0.
  double delta = std::numeric_limits<double>::infinity();
  Decomposition witness;
  // Worst-case distance to the true optimum (zero for the LP).
  double error_bound = 0.0;
  std::size_t pivots = 0;
};

inline double mean_for(std::span<const double> means, Level n) { return means[static_cast<std::size_t>(n - 1)]; }

inline void check_inputs(const LocalityTable& table, std::span<const double> means, const RateVector& lambda) {
  if (means.size() != static_cast<std::size_t>(table.levels())) {
    throw ConfigError("need one service mean per locality level");
  }
  if (lambda.rates.size() != table.type_count()) {
    throw ConfigError("rate vector size does not match the type list");
  }
  for (double r : lambda.rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::domain_error("arrival rates must be finite and >= 0");
  }
}

// Left-hand side of the per-server necessary condition.
inline std::vector<double> server_loads(const LocalityTable& table, std::span<const double> means,
                                        const Decomposition& dec) {
  std::vector<double> load(table.servers(), 0.0);
  for (TypeIndex l = 0; l < dec.types; ++l) {
    for (ServerIndex m = 0; m < dec.servers; ++m) {
      load[m] += dec.at(l, m) * mean_for(means, table.level(l, m));
    }
  }
  return load;
}

inline std::vector<double> server_loads(const LocalityTable& table, std::span<const double> means,
                                        const RefinedDecomposition& dec) {
  std::vector<double> load(table.servers(), 0.0);
  for (TypeIndex l = 0; l < dec.types(); ++l) {
    for (ServerIndex m = 0; m < dec.servers(); ++m) {
      load[m] += dec.coarse(l, m) * mean_for(means, table.level(l, m));
    }
  }
  return load;
}

inline bool is_valid_decomposition(const RateVector& lambda, const Decomposition& dec, double tol = 1e-9) {
  if (dec.types != lambda.rates.size()) return false;
  for (TypeIndex l = 0; l < dec.types; ++l) {
    double sum = 0.0;
    for (ServerIndex m = 0; m < dec.servers; ++m) {
      if (dec.at(l, m) < 0.0) return false;
      sum += dec.at(l, m);
    }
    if (std::abs(sum - lambda.rates[l]) > tol * std::max(1.0, lambda.rates[l])) return false;
  }
  return true;
}

inline bool is_valid_refinement(const RateVector& lambda, const RefinedDecomposition& dec, double tol = 1e-9) {
  if (dec.types() != lambda.rates.size()) return false;
  for (TypeIndex l = 0; l < dec.types(); ++l) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dec.replicas(l); ++j) {
      for (ServerIndex m = 0; m < dec.servers(); ++m) {
        if (dec.at(l, j, m) < 0.0) return false;
        sum += dec.at(l, j, m);
      }
    }
    if (std::abs(sum - lambda.rates[l]) > tol * std::max(1.0, lambda.rates[l])) return false;
  }
  return true;
}

namespace detail {

inline CapacityResult finish_result(const LocalityTable& table, std::span<const double> means, Decomposition witness) {
  CapacityResult out;
  const auto loads = server_loads(table, means, witness);
  out.rho_star = loads.empty() ? 0.0 : *std::max_element(loads.begin(), loads.end());
  out.feasible = out.rho_star < 1.0 - kMembershipTolerance;
  out.delta = out.rho_star > 0.0 ? 1.0 / out.rho_star - 1.0 : std::numeric_limits<double>::infinity();
  out.witness = std::move(witness);
  return out;
}

}  // namespace detail

// Minimize rho s.t. sum_m x_{L,m} = lambda_L, x >= 0 and each server load <= rho.
inline CapacityResult capacity_membership(const LocalityTable& table, std::span<const double> means,
                                          const RateVector& lambda, const SimplexOptions& opt = {}) {
  check_inputs(table, means, lambda);
  const std::size_t servers = table.servers();
  Decomposition witness(table.type_count(), servers);

  std::vector<TypeIndex> active;
  for (TypeIndex l = 0; l < table.type_count(); ++l) {
    if (lambda.rates[l] > 0.0) active.push_back(l);
  }
  if (active.empty()) return detail::finish_result(table, means, std::move(witness));

  // Solve on the normalized vector; the optimum is homogeneous in lambda.
  const double total = lambda.total();
  const std::size_t k = active.size();
  const std::size_t rho_col = k * servers;
  LinearProgram lp(k + servers, rho_col + 1 + servers);
  for (std::size_t a = 0; a < k; ++a) {
    for (ServerIndex m = 0; m < servers; ++m) lp.at(a, a * servers + m) = 1.0;
    lp.b[a] = lambda.rates[active[a]] / total;
  }
  for (ServerIndex m = 0; m < servers; ++m) {
    const std::size_t row = k + m;
    for (std::size_t a = 0; a < k; ++a) {
      lp.at(row, a * servers + m) = mean_for(means, table.level(active[a], m));
    }
    lp.at(row, rho_col) = -1.0;
    lp.at(row, rho_col + 1 + m) = 1.0;
  }
  lp.c[rho_col] = 1.0;

  const LpSolution sol = solve_lp(lp, opt);
  if (sol.status != LpStatus::optimal) {
    throw NumericalError("capacity LP did not reach an optimum (" +
                         std::string(sol.status == LpStatus::infeasible ? "infeasible" : "unbounded") +
                         ") after " + std::to_string(sol.pivots) + " pivots");
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (ServerIndex m = 0; m < servers; ++m) witness.at(active[a], m) = sol.x[a * servers + m] * total;
  }
  auto out = detail::finish_result(table, means, std::move(witness));
  out.pivots = sol.pivots;
  return out;
}

// Lambda-bar witness: each lambda_{L,m} split evenly over the d local
// servers of L. The rounding residual goes to the last local server, so
// summing the pieces in order reproduces lambda_{L,m} bit for bit.
inline RefinedDecomposition refine_decomposition(const LocalityTable& table, const Decomposition& dec) {
  if (dec.types != table.type_count() || dec.servers != table.servers()) {
    throw std::invalid_argument("decomposition does not match the locality table");
  }
  RefinedDecomposition out(table);
  for (TypeIndex l = 0; l < dec.types; ++l) {
    const std::size_t d = out.replicas(l);
    for (ServerIndex m = 0; m < dec.servers; ++m) {
      const double x = dec.at(l, m);
      const double piece = x / static_cast<double>(d);
      double partial = 0.0;
      for (std::size_t j = 0; j + 1 < d; ++j) {
        out.at(l, j, m) = piece;
        partial += piece;
      }
      out.at(l, d - 1, m) = x - partial;
    }
  }
  return out;
}

inline Decomposition coarsen_decomposition(const RefinedDecomposition& refined) {
  Decomposition out(refined.types(), refined.servers());
  for (TypeIndex l = 0; l < refined.types(); ++l) {
    for (ServerIndex m = 0; m < refined.servers(); ++m) out.at(l, m) = refined.coarse(l, m);
  }
  return out;
}

// Largest decision dimension (types with positive rate x servers) the grid
// oracle accepts.
inline constexpr std::size_t kBruteForceMaxDimension = 6;

// Distance bound between the grid optimum and rho*: rounding an optimal split
// onto the grid moves each lambda_{L,m} by at most grid_step * lambda_L.
inline double brute_force_bound(std::span<const double> means, const RateVector& lambda, double grid_step) {
  return grid_step * lambda.total() * *std::max_element(means.begin(), means.end());
}

// Exhaustive search over splits whose fractions are multiples of grid_step.
inline CapacityResult brute_force_membership(const LocalityTable& table, std::span<const double> means,
                                             const RateVector& lambda, double grid_step) {
  check_inputs(table, means, lambda);
  if (!(grid_step > 0.0) || grid_step > 1.0) throw std::domain_error("grid_step must lie in (0, 1]");
  const std::size_t servers = table.servers();

  std::vector<TypeIndex> active;
  for (TypeIndex l = 0; l < table.type_count(); ++l) {
    if (lambda.rates[l] > 0.0) active.push_back(l);
  }
  if (active.size() * servers > kBruteForceMaxDimension) {
    throw std::domain_error("brute-force oracle refuses instances with more than 6 decision variables");
  }
  if (active.empty()) {
    auto out = detail::finish_result(table, means, Decomposition(table.type_count(), servers));
    out.error_bound = 0.0;
    return out;
  }

  const auto steps = static_cast<std::size_t>(std::max<long long>(1, std::llround(1.0 / grid_step)));
  const double step = 1.0 / static_cast<double>(steps);

  // All compositions of `steps` into `servers` parts.
  std::vector<std::vector<std::size_t>> compositions;
  std::vector<std::size_t> parts(servers, 0);
  auto fill = [&](auto&& self, std::size_t idx, std::size_t left) -> void {
    if (idx + 1 == servers) {
      parts[idx] = left;
      compositions.push_back(parts);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      parts[idx] = v;
      self(self, idx + 1, left - v);
    }
  };
  fill(fill, 0, steps);

  // Load contributed to each server by each (type, composition).
  const std::size_t nc = compositions.size();
  std::vector<std::vector<double>> contrib(active.size(), std::vector<double>(nc * servers));
  for (std::size_t a = 0; a < active.size(); ++a) {
    const double rate = lambda.rates[active[a]];
    for (std::size_t c = 0; c < nc; ++c) {
      for (ServerIndex m = 0; m < servers; ++m) {
        contrib[a][c * servers + m] = rate * static_cast<double>(compositions[c][m]) * step *
                                      mean_for(means, table.level(active[a], m));
      }
    }
  }

  std::vector<std::size_t> pick(active.size(), 0);
  std::vector<std::size_t> best_pick = pick;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> load(servers);
  while (true) {
    std::fill(load.begin(), load.end(), 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const double* row = &contrib[a][pick[a] * servers];
      for (ServerIndex m = 0; m < servers; ++m) load[m] += row[m];
    }
    const double worst = *std::max_element(load.begin(), load.end());
    if (worst < best) {
      best = worst;
      best_pick = pick;
    }
    std::size_t a = 0;
    while (a < pick.size() && ++pick[a] == nc) pick[a++] = 0;
    if (a == pick.size()) break;
  }

  Decomposition witness(table.type_count(), servers);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const double rate = lambda.rates[active[a]];
    for (ServerIndex m = 0; m < servers; ++m) {
      witness.at(active[a], m) = rate * static_cast<double>(compositions[best_pick[a]][m]) * step;
    }
  }
  auto out = detail::finish_result(table, means, std::move(witness));
  out.error_bound = brute_force_bound(means, lambda, step);
  return out;
}

}  // namespace gbp
