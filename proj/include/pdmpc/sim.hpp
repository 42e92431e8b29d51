#pragma once

// Closed-loop simulation: per time step, couple, prioritize, partition, plan
// level by level, execute the first primitive of every plan and check the
// executed sweeps for collisions.

#include "pdmpc/coupling.hpp"
#include "pdmpc/mpa.hpp"
#include "pdmpc/partition.hpp"
#include "pdmpc/planner.hpp"
#include "pdmpc/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace pdmpc {

/// Planner settings used in closed loop: terminal standstill on.
inline PlannerOptions closed_loop_planner_options() {
  PlannerOptions o;
  o.terminal_standstill = true;
  return o;
}

struct SimOptions {
  /// false: no couplings and no collision handling (free-flow baseline).
  bool constraints_enabled = true;
  /// Measure per-plan wall time. Off by default so logs stay reproducible.
  bool record_timing = false;
  /// Plan each level in descending id order (same-level isolation checks).
  bool reverse_within_level = false;
  PlannerOptions planner = closed_loop_planner_options();
};

enum class PlanStatus {
  Planned,     ///< search succeeded, plan executed
  Infeasible,  ///< search failed, vehicle fell back
  Frozen,      ///< collided earlier; held at standstill
};

std::string to_string(PlanStatus s);

struct VehicleStepRecord {
  int id = 0;
  VehicleState state;  ///< at the start of the step
  MpaState mpa_state;
  int rank = 0;        ///< priority, 1 = highest
  int level = 0;       ///< computation level
  PlanStatus status = PlanStatus::Planned;
  /// Search expansions, summed over re-planning rounds.
  std::size_t expanded = 0;
  double wall_time = 0;  ///< seconds; only with record_timing
  /// The executed plan (the search result or the fallback).
  TrajectoryPrediction plan;
};

struct StepRecord {
  int step = 0;
  std::vector<Coupling> couplings;
  CouplingGraph graph;
  Partition partition;
  /// Levels of the coupling graph planned fully sequentially.
  int unpartitioned_levels = 0;
  std::vector<VehicleStepRecord> vehicles;
  /// Pairs (i < j) whose executed uninflated sweeps intersect.
  std::vector<std::pair<int, int>> collisions;
  /// Pairs whose executed plans intersect at some horizon step.
  std::vector<std::pair<int, int>> predicted_conflicts;

  int infeasible_count() const;
};

nlohmann::json to_json(const StepRecord& r);

/// All unordered pairs whose occupancies intersect.
std::vector<std::pair<int, int>> detect_collisions(const std::vector<PolyUnion>& occupancies);

/// Reference points along the vehicle's path: arc position of the current
/// position plus (h+1) * v_ref * dt, v_ref = min(max_speed, speed_limit).
ReferenceTrajectory make_reference(const Path& path, const VehicleState& s,
                                   const VehicleParams& params, double dt, int horizon);

class Simulation {
 public:
  /// `table` must belong to `mpa`; both must outlive the simulation.
  Simulation(Scenario scenario, const Mpa& mpa, const ReachTable& table,
             SimOptions options = {});

  StepRecord step();

  int step_index() const { return k_; }
  const Scenario& scenario() const { return scenario_; }
  const std::vector<VehicleState>& states() const { return states_; }
  const std::vector<MpaState>& mpa_states() const { return mpa_states_; }
  const std::vector<bool>& frozen() const { return frozen_; }

 private:
  std::optional<TrajectoryPrediction> standstill_plan(int v) const;

  Scenario scenario_;
  const Mpa& mpa_;
  const ReachTable& table_;
  SimOptions options_;
  int k_ = 0;
  std::vector<VehicleState> states_;
  std::vector<MpaState> mpa_states_;
  std::vector<std::optional<TrajectoryPrediction>> previous_;
  std::vector<bool> frozen_;
};

struct RunMetrics {
  double avg_speed = 0;
  double free_flow_avg_speed = 0;
  double normalized_avg_speed = 0;
  int max_levels_observed = 0;
  /// Distinct colliding pairs over the run.
  int collision_count = 0;
  /// Vehicle-steps whose own search failed.
  int infeasible_count = 0;
  std::vector<int> levels_per_step;
  std::vector<int> unpartitioned_levels_per_step;
};

nlohmann::json to_json(const RunMetrics& m);

struct RunResult {
  RunMetrics metrics;
  std::vector<StepRecord> log;
};

/// Mean over vehicles and steps of the executed step speed (mean of the
/// speeds at both ends of the step).
double average_speed(const std::vector<StepRecord>& log);

/// Average speed of the same scenario with inter-vehicle constraints off.
/// Cached as free_flow_<scenario hash>_<steps>.json in `cache_dir` when it
/// is non-empty.
double free_flow_speed(const Scenario& scenario, int n_steps, const Mpa& mpa,
                       const ReachTable& table, const SimOptions& options,
                       const std::filesystem::path& cache_dir = {});

RunResult run(const Scenario& scenario, int n_steps, const Mpa& mpa, const ReachTable& table,
              const SimOptions& options = {}, const std::filesystem::path& cache_dir = {});

}  // namespace pdmpc
