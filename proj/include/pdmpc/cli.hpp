#pragma once

// Command implementations behind the pdmpc executable. Every command is a
// plain function so tests can drive them without a subprocess.

#include "pdmpc/scenario.hpp"
#include "pdmpc/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pdmpc {

struct RunConfig {
  /// Built-in name or JSON file.
  std::string scenario = "loop";
  /// Vehicle count for the loop and random scenarios.
  std::optional<int> vehicles;
  std::optional<double> dt;
  std::optional<int> horizon;
  std::optional<double> margin;
  std::optional<LevelLimit> level_limit;
  std::optional<ConstraintMode> mode;
  int steps = 50;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out = "out";
  /// Reach tables and free-flow runs; empty disables caching.
  std::filesystem::path cache_dir;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "3", "0,4,7" or "0-9" (inclusive), or combinations like "0-3,8".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// Resolves the scenario for one seed and applies the overrides; validated.
Scenario make_scenario(const RunConfig& config, std::uint64_t seed);

/// One row of metrics.csv.
struct MetricsRow {
  std::uint64_t seed = 0;
  std::string level_limit;
  double normalized_avg_speed = 0;
  int max_levels = 0;
  int collisions = 0;
};

/// Header "seed,level_limit,normalized_avg_speed,max_levels,collisions";
/// speeds with six decimals.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Builds (or loads) the reach table; prints per-state part counts to `log`.
/// Returns the cache file.
std::filesystem::path cmd_build_mpa(const RunConfig& config, std::ostream& log);

/// One simulation per seed. Writes <out>/metrics.csv, <out>/metrics.json and
/// <out>/run_<seed>.jsonl (one step record per line).
std::vector<MetricsRow> cmd_run(const RunConfig& config, std::ostream& log);

struct ModeSummary {
  ConstraintMode mode = ConstraintMode::ReachableSets;
  int collisions = 0;
  /// Steps where at least one vehicle's own search failed.
  int infeasible_steps = 0;
  std::optional<int> first_collision_step;
  /// Per step: some pair of executed plans intersects within the horizon.
  std::vector<bool> predicted_intersection;
  /// Executed positions per step and vehicle.
  std::vector<std::vector<Vec2d>> positions;
};

struct CompareReport {
  std::uint64_t seed = 0;
  ModeSummary previous;
  ModeSummary reach;
};

nlohmann::json to_json(const CompareReport& r);

/// Runs the scenario at level limit 1 in both constraint modes. Writes
/// <out>/compare.json and <out>/compare.csv.
std::vector<CompareReport> cmd_compare_constraints(const RunConfig& config, std::ostream& log);

struct Quartiles {
  double q1 = 0, median = 0, q3 = 0;
};

/// Linear interpolation between order statistics; empty input gives zeros.
Quartiles quartiles(std::vector<double> values);

struct SweepRow {
  LevelLimit limit = LevelLimit::unbounded();
  int runs = 0;
  Quartiles speed;
  Quartiles levels;
  Quartiles collisions;
  int collisions_total = 0;
  /// Steps where the observed levels differed from the unpartitioned count
  /// (only meaningful for the unbounded limit).
  int level_mismatches = 0;
};

struct SweepResult {
  std::vector<MetricsRow> runs;
  std::vector<SweepRow> summary;
};

/// Limits 1, 2, 3, 4, 5 and unbounded over all seeds. Writes
/// <out>/sweep_runs.csv (metrics columns) and <out>/sweep_summary.csv.
SweepResult cmd_sweep_levels(const RunConfig& config, std::ostream& log,
                             std::vector<LevelLimit> limits = {});

std::string sweep_summary_csv(const std::vector<SweepRow>& rows);

}  // namespace pdmpc
