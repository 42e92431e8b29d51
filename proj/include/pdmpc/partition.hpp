#pragma once

// Splits a directed coupling graph into sequential and parallel edges so that
// no chain of sequentially planning vehicles is longer than a level limit,
// while keeping the weight of the parallel ("cut") edges small.

#include "pdmpc/coupling.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pdmpc {

/// Allowed number of computation levels; unbounded means purely sequential.
class LevelLimit {
 public:
  static LevelLimit unbounded() { return LevelLimit(); }
  static LevelLimit finite(int value);
  /// "inf", "unbounded" or a positive integer.
  static LevelLimit parse(const std::string& text);

  bool is_unbounded() const { return !value_; }
  int value() const { return value_.value(); }
  bool allows(int levels) const { return !value_ || levels <= *value_; }
  std::string str() const { return value_ ? std::to_string(*value_) : "inf"; }

  bool operator==(const LevelLimit&) const = default;

 private:
  LevelLimit() = default;
  explicit LevelLimit(int v) : value_(v) {}
  std::optional<int> value_;
};

struct Partition {
  std::vector<CouplingEdge> sequential_edges;
  std::vector<CouplingEdge> parallel_edges;
  /// Weakly connected components of the sequential subgraph.
  std::vector<std::vector<int>> groups;
  std::vector<int> levels_per_group;
  std::vector<int> group_of;
  /// 1-based computation level of every vehicle within its group.
  std::vector<int> level_of;

  /// Sum of parallel edge weights, in (from, to) order.
  double cut_weight() const;
  int max_levels() const;
};

/// Whether `e` (matched by endpoints) is planned sequentially.
bool is_sequential(const Partition& part, const CouplingEdge& e);

struct Levels {
  std::vector<int> levels_per_group;
  std::vector<int> level_of;
};

/// Longest-path levels: level_of(v) = 1 + max level of its sequential
/// predecessors. Throws std::invalid_argument on a cycle.
Levels compute_levels(int n, const std::vector<CouplingEdge>& sequential_edges,
                      const std::vector<std::vector<int>>& groups);

/// Number of levels of the whole graph planned sequentially.
int sequential_level_count(const CouplingGraph& g);

/// Descending-weight greedy. Throws std::invalid_argument for cyclic input.
Partition partition_greedy(const CouplingGraph& g, LevelLimit limit);

/// Single greedy pass at exactly `limit`: an edge becomes sequential iff the
/// sequential subgraph stays within the limit.
Partition partition_greedy_pass(const CouplingGraph& g, LevelLimit limit);

/// Exhaustive minimum-cut partition for at most `kMaxExactEdges` edges.
inline constexpr std::size_t kMaxExactEdges = 24;
Partition partition_exact(const CouplingGraph& g, LevelLimit limit);

/// Builds the partition record (groups, levels) for a chosen sequential set.
Partition make_partition(const CouplingGraph& g, std::vector<CouplingEdge> sequential,
                         std::vector<CouplingEdge> parallel);

}  // namespace pdmpc
