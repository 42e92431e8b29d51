#pragma once

// Motion-primitive automaton (MPA) and its offline one-step reachable-set
// table. The automaton's states are discrete (speed, steering) level pairs;
// primitives are one-sample-time maneuvers between adjacent levels.

#include "pdmpc/geometry.hpp"
#include "pdmpc/vehicle_model.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pdmpc {

struct MpaState {
  int speed_index = 0;
  int steering_index = 0;

  auto operator<=>(const MpaState&) const = default;
};

struct MotionPrimitive {
  int id = 0;
  MpaState from;
  MpaState to;
  /// Vehicle states in the primitive frame: samples.front() is the origin
  /// with yaw 0 and the speed of `from`.
  std::vector<VehicleState> samples;
  /// Pose at the end of the primitive, in the primitive frame.
  Pose end_pose;
  /// Swept body occupancy, inflated by the planning margin.
  PolyUnion sweep;
  /// Swept body occupancy without margin (collision ground truth).
  PolyUnion raw_sweep;
  /// Largest distance of a `sweep` vertex from the primitive origin.
  double sweep_radius = 0;
};

struct MpaConfig {
  std::vector<double> speed_levels{0.0, 0.375, 0.75, 1.125, 1.5};
  std::vector<double> steering_levels{-0.4, -0.2, 0.0, 0.2, 0.4};
  VehicleParams params{};
  double dt = 0.2;
  double margin = 0.01;
  int horizon = 7;
  /// Stored states per primitive (excluding the start state).
  int samples = 10;
  int substeps_per_sample = 10;
  /// Convex pieces per swept occupancy.
  int sweep_parts = 3;
};

class Mpa {
 public:
  Mpa() = default;

  const MpaConfig& config() const { return config_; }
  int horizon() const { return config_.horizon; }
  double dt() const { return config_.dt; }
  const VehicleParams& params() const { return config_.params; }

  int speed_level_count() const { return static_cast<int>(config_.speed_levels.size()); }
  int steering_level_count() const {
    return static_cast<int>(config_.steering_levels.size());
  }
  int state_count() const { return speed_level_count() * steering_level_count(); }

  bool valid(const MpaState& s) const {
    return s.speed_index >= 0 && s.speed_index < speed_level_count() &&
           s.steering_index >= 0 && s.steering_index < steering_level_count();
  }
  int index(const MpaState& s) const;
  MpaState state(int index) const {
    return {index / steering_level_count(), index % steering_level_count()};
  }

  double speed(const MpaState& s) const { return config_.speed_levels.at(s.speed_index); }
  double steering(const MpaState& s) const {
    return config_.steering_levels.at(s.steering_index);
  }
  /// Level index of steering angle zero.
  int straight_steering_index() const { return straight_index_; }

  const std::vector<MotionPrimitive>& primitives() const { return primitives_; }
  const MotionPrimitive& primitive(int id) const { return primitives_.at(id); }
  /// Ids of the primitives leaving `s`, ordered by target state index.
  const std::vector<int>& outgoing(const MpaState& s) const {
    return outgoing_.at(index(s));
  }
  std::optional<int> find_primitive(const MpaState& from, const MpaState& to) const;

  /// One-level braking step: speed down one level, steering one level
  /// toward straight.
  MpaState brake_target(const MpaState& s) const;

 private:
  friend Mpa build_mpa(const MpaConfig& config);

  MpaConfig config_;
  int straight_index_ = 0;
  std::vector<MotionPrimitive> primitives_;
  std::vector<std::vector<int>> outgoing_;
};

/// Builds the automaton: (speed i, steering j) connects to every
/// (speed k, steering l) with |k - i| <= 1 and |l - j| <= 1.
Mpa build_mpa(const MpaConfig& config);

struct ReachTableOptions {
  /// Frontier deduplication grid for end poses. Merged poses carry an error
  /// bound that inflates every occupancy placed from them.
  double position_resolution = 0.03;
  double yaw_resolution = 3.0 * std::numbers::pi / 180.0;
  /// Entries with more parts than this are compacted: one convex piece per
  /// polar cluster around the start pose, bounded by 24 support directions.
  std::size_t exact_part_limit = 64;
  int angular_bins = 16;
  double radial_bin = 0.25;
};

/// Offline one-step reachable occupancies: entry (state, h) over-approximates
/// the area the vehicle can occupy during step interval [h, h+1] when it
/// starts in `state` at the origin with yaw 0.
class ReachTable {
 public:
  ReachTable() = default;
  ReachTable(int horizon, int steering_levels,
             std::vector<std::vector<PolyUnion>> per_state, std::string key = {})
      : horizon_(horizon),
        steering_levels_(steering_levels),
        per_state_(std::move(per_state)),
        key_(std::move(key)) {}

  int horizon() const { return horizon_; }
  std::size_t state_count() const { return per_state_.size(); }
  int steering_level_count() const { return steering_levels_; }
  const std::string& key() const { return key_; }
  void set_key(std::string key) { key_ = std::move(key); }

  /// Throws std::out_of_range for an unknown state or step.
  const PolyUnion& entry(const MpaState& s, int h) const;
  const std::vector<std::vector<PolyUnion>>& entries() const { return per_state_; }

  bool operator==(const ReachTable& o) const {
    return horizon_ == o.horizon_ && steering_levels_ == o.steering_levels_ &&
           per_state_ == o.per_state_ && key_ == o.key_;
  }

 private:
  int horizon_ = 0;
  int steering_levels_ = 0;
  std::vector<std::vector<PolyUnion>> per_state_;
  std::string key_;
};

ReachTable build_reach_table(const Mpa& mpa, const ReachTableOptions& options = {});

/// Table entry moved to `pose`: rotated counterclockwise by the yaw, then
/// shifted to the position.
PolyUnion reachable_set(const ReachTable& table, const MpaState& state,
                        const Pose& pose, int h);

/// Stable hash of everything the table depends on.
std::string reach_table_key(const MpaConfig& config, const ReachTableOptions& options);

/// Versioned CBOR container with the key embedded.
void save_reach_table(const ReachTable& table, const std::filesystem::path& path);
/// Returns nullopt when the file is missing, unreadable, of another format
/// version, or stored under a different key.
std::optional<ReachTable> load_reach_table(const std::filesystem::path& path,
                                           const std::string& expected_key);

/// Loads the table for `mpa` from `cache_dir` or builds and stores it.
ReachTable load_or_build_reach_table(const Mpa& mpa, const std::filesystem::path& cache_dir,
                                     const ReachTableOptions& options = {},
                                     bool* rebuilt = nullptr);

/// Cache directory from $PDMPC_CACHE_DIR, falling back to ".pdmpc-cache".
std::filesystem::path default_cache_dir();

}  // namespace pdmpc
