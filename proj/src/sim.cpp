#include "pdmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pdmpc {

std::string to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::Planned: return "planned";
    case PlanStatus::Infeasible: return "infeasible";
    case PlanStatus::Frozen: return "frozen";
  }
  return "?";
}

int StepRecord::infeasible_count() const {
  return static_cast<int>(std::count_if(vehicles.begin(), vehicles.end(), [](const auto& v) {
    return v.status == PlanStatus::Infeasible;
  }));
}

std::vector<std::pair<int, int>> detect_collisions(const std::vector<PolyUnion>& occupancies) {
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(occupancies.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (union_intersects(occupancies[i], occupancies[j])) pairs.emplace_back(i, j);
  return pairs;
}

ReferenceTrajectory make_reference(const Path& path, const VehicleState& s,
                                   const VehicleParams& params, double dt, int horizon) {
  const double s0 = path.project(s.position());
  const double v_ref = std::min(params.max_speed, path.speed_limit());
  ReferenceTrajectory ref;
  for (int h = 0; h < horizon; ++h) ref.points.push_back(path.point_at(s0 + (h + 1) * v_ref * dt));
  return ref;
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(Scenario scenario, const Mpa& mpa, const ReachTable& table,
                       SimOptions options)
    : scenario_(std::move(scenario)), mpa_(mpa), table_(table), options_(options) {
  validate(scenario_);
  if (mpa_.horizon() != scenario_.horizon() || table_.horizon() < scenario_.horizon())
    throw std::invalid_argument("automaton/table horizon does not match the scenario");
  if (table_.steering_level_count() != mpa_.steering_level_count())
    throw std::invalid_argument("reach table does not belong to the automaton");
  for (const auto& v : scenario_.vehicles) {
    states_.push_back(v.initial);
    mpa_states_.push_back(v.initial_state);
  }
  previous_.resize(states_.size());
  frozen_.assign(states_.size(), false);
}

std::optional<TrajectoryPrediction> Simulation::standstill_plan(int v) const {
  const MpaState s = mpa_states_[v];
  const auto id = mpa_.find_primitive(s, s);
  if (!id || mpa_.speed(s) != 0) return std::nullopt;
  TrajectoryPrediction t;
  t.start = states_[v];
  t.start_state = s;
  for (int h = 0; h < scenario_.horizon(); ++h)
    t.steps.push_back(place_primitive(mpa_, *id, states_[v].pose()));
  return t;
}

StepRecord Simulation::step() {
  const int n = static_cast<int>(states_.size());
  const int horizon = scenario_.horizon();
  const bool reach_mode = scenario_.constraint_mode == ConstraintMode::ReachableSets;

  StepRecord rec;
  rec.step = k_;

  std::vector<VehicleSnapshot> snapshots;
  for (int v = 0; v < n; ++v) snapshots.push_back({mpa_states_[v], states_[v].pose()});
  ReachSets reach;
  if (options_.constraints_enabled) {
    reach = compute_reach_sets(snapshots, table_, horizon);
    rec.couplings = build_couplings(reach, horizon);
  }
  const PriorityAssignment prio = assign_priorities(rec.couplings, n, horizon);
  rec.graph = orient_and_weight(rec.couplings, prio, horizon);
  rec.partition = partition_greedy(rec.graph, scenario_.level_limit);
  rec.unpartitioned_levels = sequential_level_count(rec.graph);

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) order[v] = v;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const int la = rec.partition.level_of[a], lb = rec.partition.level_of[b];
    if (la != lb) return la < lb;
    return options_.reverse_within_level ? a > b : a < b;
  });

  std::vector<PolyUnion> footprints;
  if (!reach_mode)
    for (int v = 0; v < n; ++v)
      footprints.emplace_back(std::vector<ConvexPolygon>{footprint(states_[v], scenario_.params())});
  std::map<int, TrajectoryPrediction> previous_plans;
  for (int v = 0; v < n; ++v)
    if (previous_[v]) previous_plans.emplace(v, *previous_[v]);

  rec.vehicles.resize(static_cast<std::size_t>(n));
  std::vector<TrajectoryPrediction> plans(static_cast<std::size_t>(n));
  std::map<int, TrajectoryPrediction> received;

  // Vehicles whose plan is fixed before any search: collided ones hold
  // still, failed ones fall back. In reachable-set mode every coupled
  // neighbor avoids a fixed plan, whatever the priorities.
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  for (int v = 0; v < n; ++v) {
    auto& vr = rec.vehicles[v];
    vr.id = v;
    vr.state = states_[v];
    vr.mpa_state = mpa_states_[v];
    vr.rank = prio.rank[v];
    vr.level = rec.partition.level_of[v];
    if (frozen_[v]) {
      vr.status = PlanStatus::Frozen;
      plans[v] = *standstill_plan(v);
      fixed[v] = true;
    }
  }

  auto search = [&](int v) {
    auto& vr = rec.vehicles[v];
    ConstraintSet cons =
        reach_mode ? build_constraints(v, rec.graph, rec.partition, reach, received,
                                       scenario_.drivable_area, horizon)
                   : build_previous_trajectory_constraints(v, rec.graph, rec.partition,
                                                           previous_plans, received, footprints,
                                                           scenario_.drivable_area, horizon);
    if (reach_mode)
      for (const auto& e : rec.graph.out_edges(v))
        if (fixed[e.to])
          for (int h = 0; h < horizon; ++h)
            cons.sequential_obstacles[h].push_back(plans[e.to].steps[h].occupancy);
    const auto& path = scenario_.paths[scenario_.vehicles[v].path];
    const ReferenceTrajectory ref =
        make_reference(path, states_[v], scenario_.params(), scenario_.dt(), horizon);

    const auto t0 = std::chrono::steady_clock::now();
    PlanResult result = plan(states_[v], mpa_states_[v], ref, mpa_, cons, horizon, options_.planner);
    if (options_.record_timing)
      vr.wall_time += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    vr.expanded += result.expanded;
    return result;
  };

  if (!reach_mode) {
    for (int v : order) {
      if (!frozen_[v]) {
        PlanResult result = search(v);
        if (result.feasible()) {
          plans[v] = std::move(*result.trajectory);
        } else {
          rec.vehicles[v].status = PlanStatus::Infeasible;
          plans[v] = fallback(previous_[v], states_[v], mpa_states_[v], mpa_, horizon);
        }
      }
      received[v] = plans[v];
    }
  } else {
    // Plan in rounds. A vehicle whose search fails is fixed to its fallback
    // and the vehicles its new plan can affect search again: those coupled
    // toward it, its sequential successors, and theirs. Every round fixes at
    // least one more vehicle or ends the loop.
    std::vector<bool> dirty(static_cast<std::size_t>(n), true);
    for (bool again = true; again;) {
      again = false;
      std::vector<int> failed;
      for (int v : order) {
        if (!fixed[v] && dirty[v]) {
          PlanResult result = search(v);
          if (result.feasible()) {
            plans[v] = std::move(*result.trajectory);
          } else {
            // later levels of this round already see the fallback; peers on
            // the same level see it from the next round on
            failed.push_back(v);
            rec.vehicles[v].status = PlanStatus::Infeasible;
            plans[v] = fallback(previous_[v], states_[v], mpa_states_[v], mpa_, horizon);
          }
        }
        received[v] = plans[v];
      }
      std::fill(dirty.begin(), dirty.end(), false);
      for (int f : failed) {
        fixed[f] = true;
        for (const auto& e : rec.graph.in_edges(f)) dirty[e.from] = true;
        for (const auto& e : rec.graph.out_edges(f))
          if (is_sequential(rec.partition, e)) dirty[e.to] = true;
        again = true;
      }
      // a re-planned vehicle invalidates its sequential successors
      for (int v : order)
        if (dirty[v])
          for (const auto& e : rec.graph.out_edges(v))
            if (is_sequential(rec.partition, e)) dirty[e.to] = true;
      for (int v = 0; v < n; ++v) dirty[v] = dirty[v] && !fixed[v];
    }
  }

  std::vector<PolyUnion> executed;
  for (int v = 0; v < n; ++v) executed.push_back(plans[v].steps.front().raw_occupancy);
  if (options_.constraints_enabled) {
    rec.collisions = detect_collisions(executed);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int h = 0; h < horizon; ++h)
          if (union_intersects(plans[i].steps[h].raw_occupancy, plans[j].steps[h].raw_occupancy)) {
            rec.predicted_conflicts.emplace_back(i, j);
            break;
          }
  }

  for (int v = 0; v < n; ++v) {
    const PlannedStep& first = plans[v].steps.front();
    states_[v] = first.state;
    mpa_states_[v] = first.mpa_state;
  }
  for (const auto& [i, j] : rec.collisions) {
    for (int v : {i, j}) {
      frozen_[v] = true;
      states_[v].speed = 0;
      mpa_states_[v].speed_index = 0;
    }
  }
  for (int v = 0; v < n; ++v) {
    rec.vehicles[v].plan = plans[v];
    previous_[v] = frozen_[v] ? standstill_plan(v) : std::optional(std::move(plans[v]));
  }
  ++k_;
  return rec;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json state_json(const VehicleState& s) { return {s.x, s.y, s.yaw, s.speed}; }

}  // namespace

nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  nlohmann::json couplings = nlohmann::json::array();
  for (const auto& c : r.couplings) couplings.push_back({c.i, c.j, c.earliest_step});
  j["couplings"] = std::move(couplings);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : r.graph.edges()) edges.push_back({e.from, e.to, e.weight, e.earliest_step});
  j["graph"] = {{"vehicles", r.graph.vehicle_count()}, {"edges", std::move(edges)}};
  auto edge_list = [](const std::vector<CouplingEdge>& es) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : es) a.push_back({e.from, e.to});
    return a;
  };
  j["partition"] = {{"sequential", edge_list(r.partition.sequential_edges)},
                    {"parallel", edge_list(r.partition.parallel_edges)},
                    {"groups", r.partition.groups},
                    {"levels_per_group", r.partition.levels_per_group},
                    {"level_of", r.partition.level_of},
                    {"cut_weight", r.partition.cut_weight()},
                    {"max_levels", r.partition.max_levels()}};
  j["unpartitioned_levels"] = r.unpartitioned_levels;
  nlohmann::json vehicles = nlohmann::json::array();
  for (const auto& v : r.vehicles) {
    nlohmann::json vj;
    vj["id"] = v.id;
    vj["state"] = state_json(v.state);
    vj["mpa_state"] = {v.mpa_state.speed_index, v.mpa_state.steering_index};
    vj["rank"] = v.rank;
    vj["level"] = v.level;
    vj["status"] = to_string(v.status);
    vj["feasible"] = v.status != PlanStatus::Infeasible;
    vj["expanded"] = v.expanded;
    vj["cost"] = v.plan.cost;
    nlohmann::json prims = nlohmann::json::array(), states = nlohmann::json::array();
    for (const auto& s : v.plan.steps) {
      prims.push_back(s.primitive);
      states.push_back(state_json(s.state));
    }
    vj["primitives"] = std::move(prims);
    vj["states"] = std::move(states);
    if (v.wall_time > 0) vj["wall_time"] = v.wall_time;
    vehicles.push_back(std::move(vj));
  }
  j["vehicles"] = std::move(vehicles);
  nlohmann::json collisions = nlohmann::json::array();
  for (const auto& [a, b] : r.collisions) collisions.push_back({a, b});
  j["collisions"] = std::move(collisions);
  nlohmann::json conflicts = nlohmann::json::array();
  for (const auto& [a, b] : r.predicted_conflicts) conflicts.push_back({a, b});
  j["predicted_conflicts"] = std::move(conflicts);
  return j;
}

nlohmann::json to_json(const RunMetrics& m) {
  return {{"avg_speed", m.avg_speed},
          {"free_flow_avg_speed", m.free_flow_avg_speed},
          {"normalized_avg_speed", m.normalized_avg_speed},
          {"max_levels_observed", m.max_levels_observed},
          {"collision_count", m.collision_count},
          {"infeasible_count", m.infeasible_count},
          {"levels_per_step", m.levels_per_step},
          {"unpartitioned_levels_per_step", m.unpartitioned_levels_per_step}};
}

// ---------------------------------------------------------------------------
// Runs

double average_speed(const std::vector<StepRecord>& log) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto& r : log)
    for (const auto& v : r.vehicles) {
      sum += 0.5 * (v.state.speed + v.plan.steps.front().state.speed);
      ++count;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

namespace {

std::vector<StepRecord> simulate(const Scenario& scenario, int n_steps, const Mpa& mpa,
                                 const ReachTable& table, const SimOptions& options) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  Simulation sim(scenario, mpa, table, options);
  std::vector<StepRecord> log;
  log.reserve(static_cast<std::size_t>(n_steps));
  for (int k = 0; k < n_steps; ++k) log.push_back(sim.step());
  return log;
}

std::string free_flow_key(const Scenario& scenario, int n_steps, const SimOptions& o) {
  // Level limit and constraint mode do not matter without constraints.
  Scenario s = scenario;
  s.level_limit = LevelLimit::unbounded();
  s.constraint_mode = ConstraintMode::ReachableSets;
  std::ostringstream key;
  char buf[64];
  std::snprintf(buf, sizeof buf, "_%d_%a_%a_%zu_%d", n_steps, o.planner.position_resolution,
                o.planner.yaw_resolution, o.planner.max_expansions,
                o.planner.terminal_standstill ? 1 : 0);
  key << scenario_hash(s) << buf;
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : key.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

double free_flow_speed(const Scenario& scenario, int n_steps, const Mpa& mpa,
                       const ReachTable& table, const SimOptions& options,
                       const std::filesystem::path& cache_dir) {
  std::filesystem::path file;
  const std::string key = free_flow_key(scenario, n_steps, options);
  if (!cache_dir.empty()) {
    file = cache_dir / ("free_flow_" + key + ".json");
    std::ifstream in(file);
    if (in) {
      try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("key").get<std::string>() == key) return j.at("avg_speed").get<double>();
      } catch (const std::exception&) {
        // unreadable cache entry: recompute below
      }
    }
  }
  SimOptions free = options;
  free.constraints_enabled = false;
  free.record_timing = false;
  const double v = average_speed(simulate(scenario, n_steps, mpa, table, free));
  if (!file.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    const auto tmp = file.string() + ".tmp";
    {
      std::ofstream out(tmp);
      out << nlohmann::json{{"key", key}, {"avg_speed", v}}.dump();
    }
    std::filesystem::rename(tmp, file, ec);
  }
  return v;
}

RunResult run(const Scenario& scenario, int n_steps, const Mpa& mpa, const ReachTable& table,
              const SimOptions& options, const std::filesystem::path& cache_dir) {
  RunResult out;
  out.log = simulate(scenario, n_steps, mpa, table, options);
  RunMetrics& m = out.metrics;
  m.avg_speed = average_speed(out.log);
  m.free_flow_avg_speed =
      options.constraints_enabled
          ? free_flow_speed(scenario, n_steps, mpa, table, options, cache_dir)
          : m.avg_speed;
  m.normalized_avg_speed =
      m.free_flow_avg_speed > 0 ? m.avg_speed / m.free_flow_avg_speed : 1.0;
  std::set<std::pair<int, int>> pairs;
  for (const auto& r : out.log) {
    m.levels_per_step.push_back(r.partition.max_levels());
    m.unpartitioned_levels_per_step.push_back(r.unpartitioned_levels);
    m.max_levels_observed = std::max(m.max_levels_observed, r.partition.max_levels());
    m.infeasible_count += r.infeasible_count();
    pairs.insert(r.collisions.begin(), r.collisions.end());
  }
  m.collision_count = static_cast<int>(pairs.size());
  return out;
}

}  // namespace pdmpc
