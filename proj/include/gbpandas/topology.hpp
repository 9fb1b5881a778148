#pragma once

// Cluster hierarchy and the locality-level relation between task types and
// servers. Servers are 0-based here; external formats use 1-based indices.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbpandas/errors.hpp"

namespace gbp {

using ServerIndex = std::size_t;
using TypeIndex = std::size_t;
// Locality level in 1..N; 1 means the data is on the server's own disk.
using Level = int;

class TaskType {
 public:
  TaskType() = default;

  explicit TaskType(std::vector<ServerIndex> locals) : locals_(std::move(locals)) {
    if (locals_.empty()) {
      throw ConfigError("task type needs at least one local server");
    }
    for (std::size_t i = 1; i < locals_.size(); ++i) {
      if (locals_[i - 1] >= locals_[i]) {
        throw ConfigError("task type local servers must be strictly increasing");
      }
    }
  }

  std::span<const ServerIndex> locals() const { return locals_; }
  std::size_t replicas() const { return locals_.size(); }

  bool is_local(ServerIndex m) const {
    return std::binary_search(locals_.begin(), locals_.end(), m);
  }

  friend bool operator==(const TaskType&, const TaskType&) = default;
  friend auto operator<=>(const TaskType&, const TaskType&) = default;

 private:
  std::vector<ServerIndex> locals_;
};

// Balanced tree of `branching` tiers below the root; leaves are servers.
// Two servers whose deepest common ancestor sits at tier j are at level
// N - j from each other, with N = tiers + 1.
class ClusterTopology {
 public:
  ClusterTopology() : ClusterTopology(std::vector<std::size_t>{}) {}

  explicit ClusterTopology(std::vector<std::size_t> branching)
      : branching_(std::move(branching)) {
    stride_.assign(branching_.size() + 1, 1);
    for (std::size_t j = branching_.size(); j-- > 0;) {
      if (branching_[j] == 0) {
        throw ConfigError("branching entries must be positive");
      }
      if (stride_[j + 1] > std::numeric_limits<std::size_t>::max() / branching_[j]) {
        throw ConfigError("topology too large");
      }
      stride_[j] = stride_[j + 1] * branching_[j];
    }
  }

  int levels() const { return static_cast<int>(branching_.size()) + 1; }
  std::size_t servers() const { return stride_.front(); }
  std::span<const std::size_t> branching() const { return branching_; }

  // Level between two servers (1 when identical).
  Level pair_level(ServerIndex a, ServerIndex b) const {
    check_server(a);
    check_server(b);
    const std::size_t tiers = branching_.size();
    std::size_t depth = tiers;
    while (a / stride_[depth] != b / stride_[depth]) {
      --depth;
    }
    return levels() - static_cast<int>(depth);
  }

  // Level of `type` at `server`, measured to the nearest local server.
  Level level(const TaskType& type, ServerIndex server) const {
    check_server(server);
    validate(type);
    Level best = levels();
    for (ServerIndex local : type.locals()) {
      best = std::min(best, pair_level(local, server));
      if (best == 1) break;
    }
    return best;
  }

  std::vector<ServerIndex> local_set(const TaskType& type, Level n) const {
    if (n < 1 || n > levels()) {
      throw std::domain_error("locality level out of range");
    }
    std::vector<ServerIndex> out;
    for (ServerIndex m = 0; m < servers(); ++m) {
      if (level(type, m) == n) out.push_back(m);
    }
    return out;
  }

  // All C(M, d) strictly increasing d-tuples in lexicographic order.
  std::vector<TaskType> enumerate_types(std::size_t d) const {
    const std::size_t m = servers();
    if (d < 1 || d > m) {
      throw std::domain_error("replica count must be in [1, M]");
    }
    std::vector<TaskType> out;
    std::vector<ServerIndex> combo(d);
    std::iota(combo.begin(), combo.end(), ServerIndex{0});
    while (true) {
      out.emplace_back(combo);
      std::size_t i = d;
      while (i > 0 && combo[i - 1] == m - d + (i - 1)) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < d; ++j) combo[j] = combo[j - 1] + 1;
    }
    return out;
  }

  void validate(const TaskType& type) const {
    if (type.replicas() == 0 || type.locals().back() >= servers()) {
      throw std::domain_error("task type references a server outside the topology");
    }
  }

 private:
  void check_server(ServerIndex m) const {
    if (m >= servers()) {
      throw std::domain_error("server index " + std::to_string(m) + " out of range");
    }
  }

  std::vector<std::size_t> branching_;
  // stride_[j]: servers under one tier-j node; stride_[0] == M.
  std::vector<std::size_t> stride_;
};

// Precomputed level(type, server) for a fixed list of task types.
class LocalityTable {
 public:
  LocalityTable(ClusterTopology topology, std::vector<TaskType> types)
      : topology_(std::move(topology)), types_(std::move(types)) {
    const std::size_t m = topology_.servers();
    levels_.resize(types_.size() * m);
    for (TypeIndex l = 0; l < types_.size(); ++l) {
      topology_.validate(types_[l]);
      for (ServerIndex s = 0; s < m; ++s) {
        levels_[l * m + s] = topology_.level(types_[l], s);
      }
    }
  }

  static LocalityTable all_types(ClusterTopology topology, std::size_t replicas) {
    auto types = topology.enumerate_types(replicas);
    return LocalityTable(std::move(topology), std::move(types));
  }

  const ClusterTopology& topology() const { return topology_; }
  std::span<const TaskType> types() const { return types_; }
  const TaskType& type(TypeIndex l) const { return types_.at(l); }
  std::size_t type_count() const { return types_.size(); }
  std::size_t servers() const { return topology_.servers(); }
  int levels() const { return topology_.levels(); }

  Level level(TypeIndex l, ServerIndex m) const { return levels_[l * servers() + m]; }

  std::span<const Level> row(TypeIndex l) const {
    return std::span<const Level>(levels_).subspan(l * servers(), servers());
  }

 private:
  ClusterTopology topology_;
  std::vector<TaskType> types_;
  std::vector<Level> levels_;
};

}  // namespace gbp
