#pragma once

#include "pdmpc/planner.hpp"

#include <functional>
#include <optional>

namespace oracle {

using pdmpc::ConstraintSet;
using pdmpc::Mpa;
using pdmpc::MpaState;
using pdmpc::Pose;
using pdmpc::ReferenceTrajectory;
using pdmpc::VehicleState;

// Exhaustive minimum over all primitive sequences of length `horizon`.
// Constraint checks reuse only the geometry predicates.
inline std::optional<double> brute_force_plan(const Mpa& mpa, const VehicleState& start,
                                              const MpaState& s0, const ReferenceTrajectory& ref,
                                              const ConstraintSet& cons, int horizon) {
  std::optional<double> best;
  std::function<void(const MpaState&, const Pose&, int, double)> rec =
      [&](const MpaState& s, const Pose& pose, int h, double cost) {
        if (h == horizon) {
          if (!best || cost < *best) best = cost;
          return;
        }
        for (int id : mpa.outgoing(s)) {
          const auto& m = mpa.primitive(id);
          const auto occ = apply_transform(m.sweep, pose);
          bool ok = true;
          for (const auto& o : cons.parallel_obstacles[h]) ok = ok && !union_intersects(o, occ);
          for (const auto& o : cons.sequential_obstacles[h]) ok = ok && !union_intersects(o, occ);
          if (!cons.drivable_area.empty()) ok = ok && contains(cons.drivable_area, occ);
          if (!ok) continue;
          const Pose next = pose * m.end_pose;
          rec(m.to, next, h + 1, cost + (next.translation() - ref.points[h]).squaredNorm());
        }
      };
  rec(s0, start.pose(), 0, 0.0);
  return best;
}

}  // namespace oracle
