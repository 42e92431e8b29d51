#include "pdmpc/planner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace pdmpc {

ConstraintSet ConstraintSet::unconstrained(int horizon) {
  ConstraintSet c;
  c.parallel_obstacles.resize(static_cast<std::size_t>(horizon));
  c.sequential_obstacles.resize(static_cast<std::size_t>(horizon));
  return c;
}

namespace {

void add_sequential(ConstraintSet& c, int j,
                    const std::map<int, TrajectoryPrediction>& received_plans,
                    int horizon) {
  const auto it = received_plans.find(j);
  if (it == received_plans.end())
    throw SchedulingError("plan of sequential predecessor " + std::to_string(j) +
                          " is not available");
  if (static_cast<int>(it->second.steps.size()) < horizon)
    throw SchedulingError("plan of sequential predecessor is shorter than the horizon");
  for (int h = 0; h < horizon; ++h)
    c.sequential_obstacles[h].push_back(it->second.steps[h].occupancy);
}

}  // namespace

ConstraintSet build_constraints(int me, const CouplingGraph& g, const Partition& part,
                                const ReachSets& reach_sets,
                                const std::map<int, TrajectoryPrediction>& received_plans,
                                const PolyUnion& drivable, int horizon) {
  ConstraintSet c = ConstraintSet::unconstrained(horizon);
  c.drivable_area = drivable;
  for (const auto& e : g.in_edges(me)) {
    if (is_sequential(part, e)) {
      add_sequential(c, e.from, received_plans, horizon);
    } else {
      for (int h = 0; h < horizon; ++h)
        c.parallel_obstacles[h].push_back(reach_sets.at(e.from).at(h));
    }
  }
  return c;
}

ConstraintSet build_constraints(int me, const CouplingGraph& g, const Partition& part,
                                const ReachTable& table,
                                const std::map<int, VehicleSnapshot>& neighbor_states,
                                const std::map<int, TrajectoryPrediction>& received_plans,
                                const PolyUnion& drivable, int horizon) {
  ReachSets reach(static_cast<std::size_t>(g.vehicle_count()));
  for (const auto& e : g.in_edges(me)) {
    if (is_sequential(part, e) || !reach[e.from].empty()) continue;
    const VehicleSnapshot& s = neighbor_states.at(e.from);
    for (int h = 0; h < horizon; ++h)
      reach[e.from].push_back(reachable_set(table, s.state, s.pose, h));
  }
  return build_constraints(me, g, part, reach, received_plans, drivable, horizon);
}

ConstraintSet build_previous_trajectory_constraints(
    int me, const CouplingGraph& g, const Partition& part,
    const std::map<int, TrajectoryPrediction>& previous_plans,
    const std::map<int, TrajectoryPrediction>& received_plans,
    const std::vector<PolyUnion>& current_footprints, const PolyUnion& drivable,
    int horizon) {
  ConstraintSet c = ConstraintSet::unconstrained(horizon);
  c.drivable_area = drivable;
  for (const auto& e : g.in_edges(me)) {
    if (is_sequential(part, e)) {
      add_sequential(c, e.from, received_plans, horizon);
      continue;
    }
    const auto it = previous_plans.find(e.from);
    if (it == previous_plans.end() || it->second.steps.empty()) {
      for (int h = 0; h < horizon; ++h)
        c.parallel_obstacles[h].push_back(current_footprints.at(e.from));
      continue;
    }
    const auto& steps = it->second.steps;
    const int last = static_cast<int>(steps.size()) - 1;
    for (int h = 0; h < horizon; ++h)
      c.parallel_obstacles[h].push_back(steps[std::min(h + 1, last)].occupancy);
  }
  return c;
}

double stage_cost(const Vec2d& position, const Vec2d& reference) {
  return (position - reference).squaredNorm();
}

bool violates(const ConstraintSet& cons, int h, const PolyUnion& occupancy) {
  for (const auto& obstacle : cons.parallel_obstacles[h])
    if (union_intersects(obstacle, occupancy)) return true;
  for (const auto& obstacle : cons.sequential_obstacles[h])
    if (union_intersects(obstacle, occupancy)) return true;
  if (!cons.drivable_area.empty() && !contains(cons.drivable_area, occupancy)) return true;
  return false;
}

PlannedStep place_primitive(const Mpa& mpa, int id, const Pose& start_pose) {
  const MotionPrimitive& m = mpa.primitive(id);
  PlannedStep s;
  s.primitive = id;
  s.start_pose = start_pose;
  s.state = transform_state(m.samples.back(), start_pose);
  s.mpa_state = m.to;
  s.occupancy = apply_transform(m.sweep, start_pose);
  s.raw_occupancy = apply_transform(m.raw_sweep, start_pose);
  return s;
}

namespace {

struct SearchNode {
  int parent;
  int primitive;
  int state;
  int depth;
  Pose pose;
  double cost;
};

struct NodeKey {
  int depth;
  int state;
  std::int64_t x, y, yaw;
  bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.depth) * 131u + static_cast<std::size_t>(k.state);
    for (std::int64_t v : {k.x, k.y, k.yaw})
      h = h * 1000003u ^ std::hash<std::int64_t>{}(v);
    return h;
  }
};

std::int64_t quantize(double v, double resolution) {
  if (resolution > 0) return std::llround(v / resolution);
  return std::bit_cast<std::int64_t>(v);
}

struct OpenEntry {
  double priority;
  std::uint64_t seq;
  int node;
  bool operator>(const OpenEntry& o) const {
    if (priority != o.priority) return priority > o.priority;
    return seq > o.seq;
  }
};

}  // namespace

PlanResult plan(const VehicleState& start, const MpaState& start_state,
                const ReferenceTrajectory& ref, const Mpa& mpa, const ConstraintSet& cons,
                int horizon, const PlannerOptions& options) {
  if (!mpa.valid(start_state)) throw std::invalid_argument("invalid start MPA state");
  if (static_cast<int>(ref.points.size()) != horizon)
    throw std::invalid_argument("reference must have one point per horizon step");
  if (cons.horizon() != horizon || static_cast<int>(cons.sequential_obstacles.size()) != horizon)
    throw std::invalid_argument("constraint set horizon mismatch");

  const double max_step = mpa.config().speed_levels.back() * mpa.dt();
  // Admissible: the position after j more steps is within j * max_step.
  auto heuristic = [&](const Vec2d& p, int depth) {
    double sum = 0;
    for (int m = depth; m < horizon; ++m) {
      const double gap = (p - ref.points[m]).norm() - (m - depth + 1) * max_step;
      if (gap > 0) sum += gap * gap;
    }
    return sum;
  };

  std::vector<SearchNode> nodes;
  nodes.push_back({-1, -1, mpa.index(start_state), 0, start.pose(), 0.0});
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open;
  std::uint64_t seq = 0;
  open.push({heuristic(start.position(), 0), seq++, 0});
  std::unordered_map<NodeKey, double, NodeKeyHash> best;

  PlanResult result;
  int goal = -1;
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    const SearchNode node = nodes[top.node];
    if (node.depth == horizon) {
      goal = top.node;
      break;
    }
    if (node.depth > 0) {
      const NodeKey key{node.depth, node.state,
                        quantize(node.pose.x(), options.position_resolution),
                        quantize(node.pose.y(), options.position_resolution),
                        quantize(node.pose.yaw(), options.yaw_resolution)};
      if (best.at(key) < node.cost) continue;
    }
    if (++result.expanded > options.max_expansions) break;

    for (int id : mpa.outgoing(mpa.state(node.state))) {
      const MotionPrimitive& m = mpa.primitive(id);
      // Speed drops by at most one level per step.
      if (options.terminal_standstill && m.to.speed_index > horizon - (node.depth + 1)) continue;
      const Pose child_pose = node.pose * m.end_pose;
      const double cost =
          node.cost + stage_cost(child_pose.translation(), ref.points[node.depth]);
      const NodeKey key{node.depth + 1, mpa.index(m.to),
                        quantize(child_pose.x(), options.position_resolution),
                        quantize(child_pose.y(), options.position_resolution),
                        quantize(child_pose.yaw(), options.yaw_resolution)};
      const auto it = best.find(key);
      if (it != best.end() && it->second <= cost) continue;
      if (violates(cons, node.depth, apply_transform(m.sweep, node.pose))) continue;
      best[key] = cost;
      nodes.push_back({top.node, id, key.state, node.depth + 1, child_pose, cost});
      open.push({cost + heuristic(child_pose.translation(), node.depth + 1), seq++,
                 static_cast<int>(nodes.size()) - 1});
    }
  }
  if (goal < 0) return result;

  std::vector<int> chain;
  for (int n = goal; nodes[n].parent >= 0; n = nodes[n].parent) chain.push_back(n);
  std::reverse(chain.begin(), chain.end());

  TrajectoryPrediction t;
  t.start = start;
  t.start_state = start_state;
  t.cost = nodes[goal].cost;
  for (int n : chain)
    t.steps.push_back(place_primitive(mpa, nodes[n].primitive, nodes[nodes[n].parent].pose));
  result.trajectory = std::move(t);
  return result;
}

TrajectoryPrediction fallback(const std::optional<TrajectoryPrediction>& previous,
                              const VehicleState& current, const MpaState& current_state,
                              const Mpa& mpa, int horizon) {
  TrajectoryPrediction t;
  t.start = current;
  t.start_state = current_state;
  if (previous && previous->steps.size() >= 2)
    t.steps.assign(previous->steps.begin() + 1, previous->steps.end());

  Pose pose = t.steps.empty() ? current.pose() : t.steps.back().state.pose();
  MpaState state = t.steps.empty() ? current_state : t.steps.back().mpa_state;
  while (static_cast<int>(t.steps.size()) < horizon) {
    const MpaState target = mpa.brake_target(state);
    const int id = mpa.find_primitive(state, target).value();
    PlannedStep s = place_primitive(mpa, id, pose);
    pose = s.state.pose();
    state = s.mpa_state;
    t.steps.push_back(std::move(s));
  }
  t.steps.resize(static_cast<std::size_t>(horizon));
  return t;
}

}  // namespace pdmpc
