#pragma once

#include "pdmpc/geometry.hpp"
#include "pdmpc/mpa.hpp"
#include "pdmpc/partition.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pdmpc {

/// Polyline with arc-length parametrization; closed paths wrap around.
class Path {
 public:
  Path() = default;
  Path(std::vector<Vec2d> points, bool closed, double speed_limit);

  const std::vector<Vec2d>& points() const { return points_; }
  bool closed() const { return closed_; }
  double speed_limit() const { return speed_limit_; }
  double length() const { return cumulative_.back(); }

  /// Arc position of the closest point on the path.
  double project(const Vec2d& p) const;
  /// Point at arc position s; open paths extrapolate past both ends.
  Vec2d point_at(double s) const;
  /// Tangent heading at arc position s.
  double heading_at(double s) const;

 private:
  std::size_t segment_at(double& s) const;

  std::vector<Vec2d> points_;
  std::vector<double> cumulative_;
  bool closed_ = false;
  double speed_limit_ = 0;
};

enum class ConstraintMode { ReachableSets, PreviousTrajectory };

std::string to_string(ConstraintMode mode);
/// "reach" or "prev".
ConstraintMode parse_constraint_mode(const std::string& text);

struct VehicleSpec {
  VehicleState initial;
  MpaState initial_state;
  int path = 0;
};

struct Scenario {
  std::string name;
  /// Empty means the whole plane is drivable.
  PolyUnion drivable_area;
  std::vector<Path> paths;
  std::vector<VehicleSpec> vehicles;
  /// Automaton levels, vehicle parameters, dt, horizon and margin.
  MpaConfig mpa;
  LevelLimit level_limit = LevelLimit::unbounded();
  ConstraintMode constraint_mode = ConstraintMode::ReachableSets;
  std::uint64_t seed = 0;

  double dt() const { return mpa.dt; }
  int horizon() const { return mpa.horizon; }
  const VehicleParams& params() const { return mpa.params; }
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checks automaton settings, path references, initial states inside the
/// drivable area and pairwise non-overlapping initial footprints.
void validate(const Scenario& s);

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

/// Stable hash of the scenario content (used to cache free-flow runs).
std::string scenario_hash(const Scenario& s);

// Built-in scenarios. All vehicles start at standstill unless noted.

/// One vehicle on a straight road.
Scenario single_vehicle_scenario();

/// Three vehicles crossing a four-way intersection: vehicle 0 heading
/// west-to-east, vehicle 1 south-to-north, vehicle 2 east-to-west.
Scenario intersection_scenario();

/// `n` vehicles in one platoon on a rounded-rectangle circuit; the seed
/// draws the bumper gaps.
Scenario loop_scenario(int n = 20, std::uint64_t seed = 0);

/// `n` vehicles on random straight paths through a square arena.
Scenario random_scenario(int n = 8, std::uint64_t seed = 0);

/// Resolves "single", "intersection", "loop", "loop:<n>", "random",
/// "random:<n>" or a JSON file path.
Scenario resolve_scenario(const std::string& name_or_path, std::uint64_t seed);

}  // namespace pdmpc
