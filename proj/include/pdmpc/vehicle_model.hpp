#pragma once

#include "pdmpc/geometry.hpp"

#include <vector>

namespace pdmpc {

struct VehicleState {
  double x = 0;
  double y = 0;
  double yaw = 0;    ///< rad, (-pi, pi]
  double speed = 0;  ///< m/s, >= 0

  Pose pose() const { return {x, y, yaw}; }
  Vec2d position() const { return {x, y}; }
};

struct VehicleInput {
  double steering_angle = 0;  ///< rad
  double target_speed = 0;    ///< m/s, reached linearly at the end of the step
};

/// Kinematic single-track parameters. Defaults are 1:18-scale lab vehicles.
struct VehicleParams {
  double wheelbase = 0.15;
  double body_length = 0.22;
  double body_width = 0.107;
  double max_speed = 1.5;
  double max_steering = 0.6;

  void validate() const;
};

/// Forward-Euler integration of the kinematic single-track model over `dt`,
/// split into `substeps` equal substeps. Speed ramps linearly from the
/// current speed to `u.target_speed` over `dt`; steering is held.
VehicleState integrate(const VehicleState& s, const VehicleInput& u,
                       const VehicleParams& p, double dt, int substeps);

/// States at `samples` equally spaced instants in (0, dt] (the initial state
/// is not included) of the same integration as `integrate`, using
/// `substeps_per_sample` Euler substeps between samples.
std::vector<VehicleState> integrate_samples(const VehicleState& s,
                                            const VehicleInput& u,
                                            const VehicleParams& p, double dt,
                                            int samples, int substeps_per_sample);

/// Body rectangle centered on the reference point, rotated by yaw.
ConvexPolygon footprint(const VehicleState& s, const VehicleParams& p);
ConvexPolygon footprint(const Pose& pose, const VehicleParams& p);

/// Maps `s`, given in the local coordinates of `frame`, to world
/// coordinates; speed is unchanged.
VehicleState transform_state(const VehicleState& s, const Pose& frame);

}  // namespace pdmpc
