#pragma once

// Exhaustive enumeration of primitive sequences, the reference for the
// reachable-set table.

#include "pdmpc/mpa.hpp"

namespace oracle {

// Calls f(h, pose, primitive) for every primitive sequence of length h + 1
// <= horizon from `start`; `pose` is where the last primitive starts.
template <typename F>
void enumerate_sequences(const pdmpc::Mpa& mpa, const pdmpc::MpaState& start, int horizon,
                         F&& f, int h = 0, const pdmpc::Pose& pose = {}) {
  if (h >= horizon) return;
  for (int id : mpa.outgoing(start)) {
    const auto& m = mpa.primitive(id);
    f(h, pose, m);
    enumerate_sequences(mpa, m.to, horizon, f, h + 1, pose * m.end_pose);
  }
}

inline pdmpc::MpaConfig small_config(int horizon) {
  pdmpc::MpaConfig c;
  c.speed_levels = {0.0, 0.75, 1.5};
  c.steering_levels = {-0.4, 0.0, 0.4};
  c.horizon = horizon;
  return c;
}

}  // namespace oracle
