#pragma once

#include "pdmpc/geometry.hpp"
#include "pdmpc/mpa.hpp"

#include <vector>

namespace pdmpc {

/// Undirected coupling between vehicles i < j whose one-step reachable sets
/// first intersect at step `earliest_step`.
struct Coupling {
  int i = 0;
  int j = 0;
  int earliest_step = 0;

  bool operator==(const Coupling&) const = default;
};

struct VehicleSnapshot {
  MpaState state;
  Pose pose;
};

/// reach_sets[v][h] is vehicle v's one-step reachable set for step h.
using ReachSets = std::vector<std::vector<PolyUnion>>;

ReachSets compute_reach_sets(const std::vector<VehicleSnapshot>& vehicles,
                             const ReachTable& table, int horizon);

/// Pairs whose reachable sets intersect at some step h < horizon.
std::vector<Coupling> build_couplings(const ReachSets& reach_sets, int horizon);
std::vector<Coupling> build_couplings(const std::vector<VehicleSnapshot>& vehicles,
                                      const ReachTable& table, int horizon);

/// rank[v] is vehicle v's priority; 1 is the highest.
struct PriorityAssignment {
  std::vector<int> rank;

  bool higher(int a, int b) const { return rank.at(a) < rank.at(b); }
};

/// Sorts vehicles by (earliest coupling step, id); uncoupled vehicles use
/// `horizon` as their step.
PriorityAssignment assign_priorities(const std::vector<Coupling>& couplings, int n,
                                     int horizon);

struct CouplingEdge {
  int from = 0;  ///< higher priority
  int to = 0;    ///< lower priority
  double weight = 0;
  int earliest_step = 0;

  bool operator==(const CouplingEdge&) const = default;
};

/// Directed coupling graph. Edges follow a total priority order, so the
/// graph is acyclic. Edges are kept sorted by (from, to).
class CouplingGraph {
 public:
  CouplingGraph() = default;
  CouplingGraph(int n_vehicles, std::vector<CouplingEdge> edges);

  int vehicle_count() const { return n_; }
  const std::vector<CouplingEdge>& edges() const { return edges_; }
  std::vector<CouplingEdge> in_edges(int v) const;
  std::vector<CouplingEdge> out_edges(int v) const;

  /// Kahn order; empty optional when the edges contain a cycle.
  std::optional<std::vector<int>> topological_order() const;
  bool acyclic() const { return topological_order().has_value(); }

  /// Weakly connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<int>> weak_components() const;

 private:
  int n_ = 0;
  std::vector<CouplingEdge> edges_;
};

/// Weight (horizon - h*) / horizon, in (0, 1].
double coupling_weight(int earliest_step, int horizon);

CouplingGraph orient_and_weight(const std::vector<Coupling>& couplings,
                                const PriorityAssignment& priorities, int horizon);

}  // namespace pdmpc
