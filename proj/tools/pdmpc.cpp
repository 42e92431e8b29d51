// pdmpc: build reach-table caches, run closed-loop simulations, compare the
// two parallel constraint modes and sweep computation level limits.

#include "pdmpc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flags {
  std::string scenario = "loop";
  int vehicles = 0;
  double dt = 0;
  int horizon = 0;
  double margin = -1;
  std::string level_limit;
  std::string mode;
  int steps = 50;
  std::string seeds = "0";
  std::string out = "out";
  std::string cache;

  pdmpc::RunConfig config() const {
    pdmpc::RunConfig c;
    c.scenario = scenario;
    if (vehicles > 0) c.vehicles = vehicles;
    if (dt > 0) c.dt = dt;
    if (horizon > 0) c.horizon = horizon;
    if (margin >= 0) c.margin = margin;
    if (!level_limit.empty()) c.level_limit = pdmpc::LevelLimit::parse(level_limit);
    if (!mode.empty()) c.mode = pdmpc::parse_constraint_mode(mode);
    c.steps = steps;
    c.seeds = pdmpc::parse_seeds(seeds);
    c.out = out;
    c.cache_dir = cache.empty() ? pdmpc::default_cache_dir() : std::filesystem::path(cache);
    return c;
  }
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--scenario", f.scenario,
                  "single, intersection, loop[:n], random[:n] or a JSON file")
      ->capture_default_str();
  app->add_option("--vehicles", f.vehicles, "vehicle count for loop and random");
  app->add_option("--dt", f.dt, "sample time in seconds (default 0.2)")
      ->check(CLI::PositiveNumber);
  app->add_option("--horizon", f.horizon, "prediction horizon in steps (default 7)")
      ->check(CLI::PositiveNumber);
  app->add_option("--margin", f.margin, "footprint inflation in meters (default 0.01)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--level-limit", f.level_limit, "computation level limit: integer or inf");
  app->add_option("--mode", f.mode, "parallel constraints: reach or prev")
      ->check(CLI::IsMember({"reach", "prev"}));
  app->add_option("--steps", f.steps, "simulated time steps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--seeds", f.seeds, "seed list, e.g. 0-9 or 1,4,7")->capture_default_str();
  app->add_option("--out", f.out, "output directory")->capture_default_str();
  app->add_option("--cache", f.cache, "cache directory (default $PDMPC_CACHE_DIR or .pdmpc-cache)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritized distributed MPC for networked vehicles"};
  app.require_subcommand(1);

  Flags flags;
  auto* build = app.add_subcommand("build-mpa", "build or load the reach-table cache");
  auto* run = app.add_subcommand("run", "closed-loop simulation per seed");
  auto* compare = app.add_subcommand(
      "compare-constraints", "previous-trajectory vs reachable-set constraints at level limit 1");
  auto* sweep = app.add_subcommand("sweep-levels", "level limits 1..5 and inf over all seeds");
  for (auto* sub : {build, run, compare, sweep}) add_common(sub, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const pdmpc::RunConfig config = flags.config();
    if (build->parsed()) {
      pdmpc::cmd_build_mpa(config, std::cout);
    } else if (run->parsed()) {
      pdmpc::cmd_run(config, std::cout);
    } else if (compare->parsed()) {
      pdmpc::cmd_compare_constraints(config, std::cout);
    } else if (sweep->parsed()) {
      const auto result = pdmpc::cmd_sweep_levels(config, std::cout);
      std::cout << pdmpc::sweep_summary_csv(result.summary);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
