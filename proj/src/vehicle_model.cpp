#include "pdmpc/vehicle_model.hpp"

#include <cmath>
#include <stdexcept>

namespace pdmpc {

void VehicleParams::validate() const {
  if (!(wheelbase > 0 && body_length > 0 && body_width > 0 && max_speed > 0 &&
        max_steering > 0))
    throw std::invalid_argument("vehicle parameters must be positive");
  if (!(body_length > wheelbase))
    throw std::invalid_argument("body length must exceed the wheelbase");
}

namespace {

void check_input(const VehicleState& s, const VehicleInput& u,
                 const VehicleParams& p, double dt, int substeps) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (std::abs(u.steering_angle) > p.max_steering + 1e-12)
    throw std::invalid_argument("steering angle exceeds max_steering");
  if (u.target_speed < 0 || u.target_speed > p.max_speed + 1e-12)
    throw std::invalid_argument("target speed outside [0, max_speed]");
  if (s.speed < 0) throw std::invalid_argument("negative speed (no reverse)");
}

}  // namespace

std::vector<VehicleState> integrate_samples(const VehicleState& s,
                                            const VehicleInput& u,
                                            const VehicleParams& p, double dt,
                                            int samples, int substeps_per_sample) {
  check_input(s, u, p, dt, samples * substeps_per_sample);
  const int total = samples * substeps_per_sample;
  const double h = dt / total;
  const double v0 = s.speed;
  const double dv = u.target_speed - s.speed;
  const double curvature = std::tan(u.steering_angle) / p.wheelbase;

  std::vector<VehicleState> out;
  out.reserve(static_cast<std::size_t>(samples));
  double x = s.x, y = s.y, yaw = s.yaw;
  for (int i = 0; i < total; ++i) {
    const double v = v0 + dv * (static_cast<double>(i) / total);
    x += h * v * std::cos(yaw);
    y += h * v * std::sin(yaw);
    yaw += h * v * curvature;
    if ((i + 1) % substeps_per_sample == 0) {
      const double t = static_cast<double>(i + 1) / total;
      out.push_back({x, y, normalize_angle(yaw), v0 + dv * t});
    }
  }
  // The ramp ends exactly on target.
  out.back().speed = u.target_speed;
  return out;
}

VehicleState integrate(const VehicleState& s, const VehicleInput& u,
                       const VehicleParams& p, double dt, int substeps) {
  return integrate_samples(s, u, p, dt, 1, substeps).back();
}

ConvexPolygon footprint(const Pose& pose, const VehicleParams& p) {
  return apply_transform(ConvexPolygon::rectangle(p.body_length, p.body_width), pose);
}

ConvexPolygon footprint(const VehicleState& s, const VehicleParams& p) {
  return footprint(s.pose(), p);
}

VehicleState transform_state(const VehicleState& s, const Pose& frame) {
  const Vec2d pos = frame.apply(s.position());
  return {pos.x(), pos.y(), normalize_angle(s.yaw + frame.yaw()), s.speed};
}

}  // namespace pdmpc
