#include "pdmpc/partition.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace pdmpc {

LevelLimit LevelLimit::finite(int value) {
  if (value < 1) throw std::invalid_argument("level limit must be >= 1");
  return LevelLimit(value);
}

LevelLimit LevelLimit::parse(const std::string& text) {
  if (text == "inf" || text == "unbounded" || text == "infinity") return unbounded();
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid level limit '" + text + "'");
  }
  if (pos != text.size()) throw std::invalid_argument("invalid level limit '" + text + "'");
  return finite(v);
}

double Partition::cut_weight() const {
  double w = 0;
  for (const auto& e : parallel_edges) w += e.weight;
  return w;
}

int Partition::max_levels() const {
  int m = 0;
  for (int l : levels_per_group) m = std::max(m, l);
  return m;
}

bool is_sequential(const Partition& part, const CouplingEdge& e) {
  return std::any_of(part.sequential_edges.begin(), part.sequential_edges.end(),
                     [&](const CouplingEdge& s) { return s.from == e.from && s.to == e.to; });
}

namespace {

bool edge_less(const CouplingEdge& a, const CouplingEdge& b) {
  return std::tie(a.from, a.to) < std::tie(b.from, b.to);
}

// Level of every vertex, or nullopt when the edges contain a cycle.
std::optional<std::vector<int>> longest_path_levels(int n,
                                                    const std::vector<CouplingEdge>& edges) {
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> succ(static_cast<std::size_t>(n));
  for (const auto& e : edges) {
    ++indegree[e.to];
    succ[e.from].push_back(e.to);
  }
  std::vector<int> level(static_cast<std::size_t>(n), 1);
  std::vector<int> ready;
  for (int v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  int visited = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++visited;
    for (int w : succ[v]) {
      level[w] = std::max(level[w], level[v] + 1);
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  if (visited != n) return std::nullopt;
  return level;
}

int max_level(int n, const std::vector<CouplingEdge>& edges) {
  const auto levels = longest_path_levels(n, edges);
  if (!levels) throw std::invalid_argument("sequential edges contain a cycle");
  return n == 0 ? 0 : *std::max_element(levels->begin(), levels->end());
}

std::vector<std::vector<int>> components(int n, const std::vector<CouplingEdge>& edges) {
  return CouplingGraph(n, edges).weak_components();
}

void require_acyclic(const CouplingGraph& g) {
  if (!g.acyclic()) throw std::invalid_argument("coupling graph is not acyclic");
}

}  // namespace

Levels compute_levels(int n, const std::vector<CouplingEdge>& sequential_edges,
                      const std::vector<std::vector<int>>& groups) {
  const auto levels = longest_path_levels(n, sequential_edges);
  if (!levels) throw std::invalid_argument("sequential edges contain a cycle");
  Levels out;
  out.level_of = *levels;
  for (const auto& group : groups) {
    int m = 0;
    for (int v : group) m = std::max(m, out.level_of.at(v));
    out.levels_per_group.push_back(m);
  }
  return out;
}

int sequential_level_count(const CouplingGraph& g) {
  return max_level(g.vehicle_count(), g.edges());
}

Partition make_partition(const CouplingGraph& g, std::vector<CouplingEdge> sequential,
                         std::vector<CouplingEdge> parallel) {
  std::sort(sequential.begin(), sequential.end(), edge_less);
  std::sort(parallel.begin(), parallel.end(), edge_less);
  Partition p;
  p.groups = components(g.vehicle_count(), sequential);
  Levels levels = compute_levels(g.vehicle_count(), sequential, p.groups);
  p.levels_per_group = std::move(levels.levels_per_group);
  p.level_of = std::move(levels.level_of);
  p.group_of.assign(static_cast<std::size_t>(g.vehicle_count()), 0);
  for (std::size_t gi = 0; gi < p.groups.size(); ++gi)
    for (int v : p.groups[gi]) p.group_of[v] = static_cast<int>(gi);
  p.sequential_edges = std::move(sequential);
  p.parallel_edges = std::move(parallel);
  return p;
}

Partition partition_greedy_pass(const CouplingGraph& g, LevelLimit limit) {
  require_acyclic(g);
  std::vector<CouplingEdge> order = g.edges();
  std::stable_sort(order.begin(), order.end(), [](const CouplingEdge& a, const CouplingEdge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return edge_less(a, b);
  });

  std::vector<CouplingEdge> sequential, parallel;
  for (const auto& e : order) {
    if (limit.is_unbounded()) {
      sequential.push_back(e);
      continue;
    }
    sequential.push_back(e);
    if (!limit.allows(max_level(g.vehicle_count(), sequential))) {
      sequential.pop_back();
      parallel.push_back(e);
    }
  }
  return make_partition(g, std::move(sequential), std::move(parallel));
}

Partition partition_greedy(const CouplingGraph& g, LevelLimit limit) {
  if (limit.is_unbounded()) return partition_greedy_pass(g, limit);
  // Any partition feasible under a smaller limit is feasible under this
  // one; keeping the best pass makes the cut weight non-increasing in the
  // limit.
  const int top = std::max(1, std::min(limit.value(), g.vehicle_count()));
  Partition best = partition_greedy_pass(g, LevelLimit::finite(top));
  for (int l = top - 1; l >= 1; --l) {
    Partition candidate = partition_greedy_pass(g, LevelLimit::finite(l));
    if (candidate.cut_weight() < best.cut_weight()) best = std::move(candidate);
  }
  return best;
}

Partition partition_exact(const CouplingGraph& g, LevelLimit limit) {
  require_acyclic(g);
  const auto& edges = g.edges();
  if (edges.size() > kMaxExactEdges)
    throw std::invalid_argument("too many edges for the exact partition solver");
  const std::size_t m = edges.size();
  const std::uint32_t masks = std::uint32_t{1} << m;

  std::optional<std::uint32_t> best_mask;
  double best_cut = 0;
  std::vector<CouplingEdge> best_seq;
  std::vector<CouplingEdge> seq;
  for (std::uint32_t mask = 0; mask < masks; ++mask) {
    seq.clear();
    double cut = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (mask >> k & 1u)
        seq.push_back(edges[k]);
      else
        cut += edges[k].weight;
    }
    if (best_mask && cut > best_cut) continue;
    if (!limit.allows(max_level(g.vehicle_count(), seq))) continue;
    const bool better =
        !best_mask || cut < best_cut ||
        std::lexicographical_compare(seq.begin(), seq.end(), best_seq.begin(),
                                     best_seq.end(), edge_less);
    if (better) {
      best_mask = mask;
      best_cut = cut;
      best_seq = seq;
    }
  }

  std::vector<CouplingEdge> sequential, parallel;
  for (std::size_t k = 0; k < m; ++k)
    (*best_mask >> k & 1u ? sequential : parallel).push_back(edges[k]);
  return make_partition(g, std::move(sequential), std::move(parallel));
}

}  // namespace pdmpc
