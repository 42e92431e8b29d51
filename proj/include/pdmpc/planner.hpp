#pragma once

// Receding-horizon graph search over the motion-primitive automaton. Each
// vehicle minimizes its squared deviation from a reference while keeping its
// occupancy clear of higher-priority neighbors: parallel neighbors through
// their reachable sets, sequential neighbors through their actual plans.

#include "pdmpc/coupling.hpp"
#include "pdmpc/geometry.hpp"
#include "pdmpc/mpa.hpp"
#include "pdmpc/partition.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pdmpc {

struct ReferenceTrajectory {
  /// One point per horizon step: the target position at the end of step h.
  std::vector<Vec2d> points;
};

struct PlannedStep {
  int primitive = -1;
  /// Pose at the start of the step.
  Pose start_pose;
  /// State and automaton state at the end of the step.
  VehicleState state;
  MpaState mpa_state;
  /// Inflated swept occupancy over the step interval.
  PolyUnion occupancy;
  /// Uninflated swept occupancy (collision ground truth).
  PolyUnion raw_occupancy;
};

struct TrajectoryPrediction {
  VehicleState start;
  MpaState start_state;
  std::vector<PlannedStep> steps;
  double cost = 0;
};

struct ConstraintSet {
  /// Per step h: reachable sets of parallel higher-priority neighbors.
  std::vector<std::vector<PolyUnion>> parallel_obstacles;
  /// Per step h: planned occupancies of sequential higher-priority neighbors.
  std::vector<std::vector<PolyUnion>> sequential_obstacles;
  /// Empty means unrestricted.
  PolyUnion drivable_area;

  static ConstraintSet unconstrained(int horizon);
  int horizon() const { return static_cast<int>(parallel_obstacles.size()); }
};

class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Constraints of vehicle `me` from its in-edges: parallel edges contribute
/// the neighbor's reachable sets, sequential edges its received plan.
/// Throws SchedulingError when a sequential predecessor has no plan yet.
ConstraintSet build_constraints(int me, const CouplingGraph& g, const Partition& part,
                                const ReachSets& reach_sets,
                                const std::map<int, TrajectoryPrediction>& received_plans,
                                const PolyUnion& drivable, int horizon);

ConstraintSet build_constraints(int me, const CouplingGraph& g, const Partition& part,
                                const ReachTable& table,
                                const std::map<int, VehicleSnapshot>& neighbor_states,
                                const std::map<int, TrajectoryPrediction>& received_plans,
                                const PolyUnion& drivable, int horizon);

/// Baseline constraint builder: parallel neighbors are represented by their
/// previous plan shifted one step forward (last step repeated); a neighbor
/// without a previous plan is assumed to stand at `current_footprints[j]`.
ConstraintSet build_previous_trajectory_constraints(
    int me, const CouplingGraph& g, const Partition& part,
    const std::map<int, TrajectoryPrediction>& previous_plans,
    const std::map<int, TrajectoryPrediction>& received_plans,
    const std::vector<PolyUnion>& current_footprints, const PolyUnion& drivable,
    int horizon);

struct PlannerOptions {
  /// Duplicate detection grid; nodes with equal step, automaton state and
  /// grid cell keep only the cheapest. Zero resolution disables merging of
  /// non-identical poses.
  double position_resolution = 1e-3;
  double yaw_resolution = 0.5 * std::numbers::pi / 180.0;
  /// Search is abandoned as infeasible after this many expansions.
  std::size_t max_expansions = 2'000'000;
  /// Require speed level 0 at the end of the horizon. Every plan then ends
  /// at rest inside its last checked occupancy, so a chain of fallbacks
  /// longer than the horizon stays collision-free.
  bool terminal_standstill = false;
};

struct PlanResult {
  std::optional<TrajectoryPrediction> trajectory;
  std::size_t expanded = 0;

  bool feasible() const { return trajectory.has_value(); }
};

/// Squared distance of each step's end position to its reference point.
double stage_cost(const Vec2d& position, const Vec2d& reference);

/// True when `occupancy` at step h violates a constraint.
bool violates(const ConstraintSet& cons, int h, const PolyUnion& occupancy);

/// Best-first search over (automaton state, pose, step). Returns the
/// minimum-cost horizon-length primitive sequence, or no trajectory when no
/// sequence satisfies the constraints.
PlanResult plan(const VehicleState& start, const MpaState& start_state,
                const ReferenceTrajectory& ref, const Mpa& mpa, const ConstraintSet& cons,
                int horizon, const PlannerOptions& options = {});

/// Places primitive `id` at `start_pose`.
PlannedStep place_primitive(const Mpa& mpa, int id, const Pose& start_pose);

/// Previous plan shifted by one step plus one braking primitive. Without a
/// previous plan, brakes from the current state for the whole horizon.
TrajectoryPrediction fallback(const std::optional<TrajectoryPrediction>& previous,
                              const VehicleState& current, const MpaState& current_state,
                              const Mpa& mpa, int horizon);

}  // namespace pdmpc
