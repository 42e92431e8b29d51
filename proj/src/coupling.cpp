#include "pdmpc/coupling.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace pdmpc {

ReachSets compute_reach_sets(const std::vector<VehicleSnapshot>& vehicles,
                             const ReachTable& table, int horizon) {
  ReachSets out(vehicles.size());
  for (std::size_t v = 0; v < vehicles.size(); ++v) {
    out[v].reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h)
      out[v].push_back(reachable_set(table, vehicles[v].state, vehicles[v].pose, h));
  }
  return out;
}

std::vector<Coupling> build_couplings(const ReachSets& reach_sets, int horizon) {
  std::vector<Coupling> out;
  const int n = static_cast<int>(reach_sets.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int h = 0; h < horizon; ++h) {
        if (union_intersects(reach_sets[i][h], reach_sets[j][h])) {
          out.push_back({i, j, h});
          break;
        }
      }
    }
  }
  return out;
}

std::vector<Coupling> build_couplings(const std::vector<VehicleSnapshot>& vehicles,
                                      const ReachTable& table, int horizon) {
  if (vehicles.empty()) throw std::invalid_argument("need at least one vehicle");
  return build_couplings(compute_reach_sets(vehicles, table, horizon), horizon);
}

PriorityAssignment assign_priorities(const std::vector<Coupling>& couplings, int n,
                                     int horizon) {
  std::vector<int> key(static_cast<std::size_t>(n), horizon);
  for (const auto& c : couplings) {
    key.at(c.i) = std::min(key.at(c.i), c.earliest_step);
    key.at(c.j) = std::min(key.at(c.j), c.earliest_step);
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::tie(key[a], a) < std::tie(key[b], b);
  });
  PriorityAssignment p;
  p.rank.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) p.rank[order[r]] = r + 1;
  return p;
}

CouplingGraph::CouplingGraph(int n_vehicles, std::vector<CouplingEdge> edges)
    : n_(n_vehicles), edges_(std::move(edges)) {
  for (const auto& e : edges_)
    if (e.from < 0 || e.to < 0 || e.from >= n_ || e.to >= n_ || e.from == e.to)
      throw std::invalid_argument("coupling edge endpoint out of range");
  std::sort(edges_.begin(), edges_.end(), [](const CouplingEdge& a, const CouplingEdge& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
}

std::vector<CouplingEdge> CouplingGraph::in_edges(int v) const {
  std::vector<CouplingEdge> out;
  for (const auto& e : edges_)
    if (e.to == v) out.push_back(e);
  return out;
}

std::vector<CouplingEdge> CouplingGraph::out_edges(int v) const {
  std::vector<CouplingEdge> out;
  for (const auto& e : edges_)
    if (e.from == v) out.push_back(e);
  return out;
}

std::optional<std::vector<int>> CouplingGraph::topological_order() const {
  std::vector<int> indegree(static_cast<std::size_t>(n_), 0);
  for (const auto& e : edges_) ++indegree[e.to];
  std::vector<int> order;
  std::vector<int> ready;
  for (int v = n_ - 1; v >= 0; --v)
    if (indegree[v] == 0) ready.push_back(v);
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (const auto& e : edges_)
      if (e.from == v && --indegree[e.to] == 0) ready.push_back(e.to);
  }
  if (static_cast<int>(order.size()) != n_) return std::nullopt;
  return order;
}

std::vector<std::vector<int>> CouplingGraph::weak_components() const {
  std::vector<int> parent(static_cast<std::size_t>(n_));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& e : edges_) parent[find(e.from)] = find(e.to);
  std::vector<std::vector<int>> comps;
  std::vector<int> comp_of(static_cast<std::size_t>(n_), -1);
  for (int v = 0; v < n_; ++v) {
    const int r = find(v);
    if (comp_of[r] < 0) {
      comp_of[r] = static_cast<int>(comps.size());
      comps.emplace_back();
    }
    comps[comp_of[r]].push_back(v);
  }
  return comps;
}

double coupling_weight(int earliest_step, int horizon) {
  return static_cast<double>(horizon - earliest_step) / horizon;
}

CouplingGraph orient_and_weight(const std::vector<Coupling>& couplings,
                                const PriorityAssignment& priorities, int horizon) {
  std::vector<CouplingEdge> edges;
  edges.reserve(couplings.size());
  for (const auto& c : couplings) {
    const bool i_first = priorities.higher(c.i, c.j);
    edges.push_back({i_first ? c.i : c.j, i_first ? c.j : c.i,
                     coupling_weight(c.earliest_step, horizon), c.earliest_step});
  }
  return CouplingGraph(static_cast<int>(priorities.rank.size()), std::move(edges));
}

}  // namespace pdmpc
