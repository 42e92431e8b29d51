#include "pdmpc/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace pdmpc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pdmpc_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

RunConfig base(const std::string& scenario, int steps, const std::string& out) {
  RunConfig c;
  c.scenario = scenario;
  c.steps = steps;
  c.out = scratch(out);
  c.cache_dir = default_cache_dir();
  return c;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(PDMPC_BIN) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("seed lists") {
  CHECK(parse_seeds("3") == std::vector<std::uint64_t>{3});
  CHECK(parse_seeds("0-3,8") == std::vector<std::uint64_t>{0, 1, 2, 3, 8});
  CHECK_THROWS_AS(parse_seeds(""), ConfigError);
  CHECK_THROWS_AS(parse_seeds("4-2"), ConfigError);
  CHECK_THROWS_AS(parse_seeds("a"), ConfigError);
}

TEST_CASE("quartiles") {
  const auto q = quartiles({4, 1, 3, 2, 5});
  CHECK(q.q1 == 2);
  CHECK(q.median == 3);
  CHECK(q.q3 == 4);
  CHECK(quartiles({1, 2}).median == doctest::Approx(1.5));
  CHECK(quartiles({}).median == 0);
}

TEST_CASE("metrics CSV layout") {
  const std::string csv = metrics_csv({{7, "inf", 0.5, 3, 0}});
  CHECK(csv == "seed,level_limit,normalized_avg_speed,max_levels,collisions\n7,inf,0.500000,3,0\n");
}

TEST_CASE("overrides") {
  RunConfig c = base("intersection", 5, "overrides");
  c.horizon = 5;
  c.dt = 0.1;
  c.margin = 0.02;
  c.level_limit = LevelLimit::finite(3);
  c.mode = ConstraintMode::PreviousTrajectory;
  const Scenario s = make_scenario(c, 0);
  CHECK(s.horizon() == 5);
  CHECK(s.dt() == 0.1);
  CHECK(s.mpa.margin == 0.02);
  CHECK(s.level_limit == LevelLimit::finite(3));
  CHECK(s.constraint_mode == ConstraintMode::PreviousTrajectory);

  c.vehicles = 4;
  CHECK_THROWS_AS(make_scenario(c, 0), ConfigError);
  RunConfig l = base("loop", 5, "overrides");
  l.vehicles = 5;
  CHECK(make_scenario(l, 0).vehicles.size() == 5);
}

TEST_CASE("build-mpa") {
  RunConfig c = base("single", 1, "build");
  c.cache_dir = scratch("build_cache");
  c.horizon = 1;
  std::ostringstream log;
  const fs::path file = cmd_build_mpa(c, log);
  CHECK(fs::exists(file));
  CHECK(log.str().find("built") == 0);
  // one count per state line: speed, steering, entry 0
  std::istringstream lines(log.str());
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    int a, b, parts;
    if (f >> a >> b >> parts) {
      int extra;
      CHECK_FALSE(static_cast<bool>(f >> extra));
      ++rows;
    }
  }
  CHECK(rows == 25);

  const std::string first = slurp(file);
  std::ostringstream again;
  CHECK(cmd_build_mpa(c, again) == file);
  CHECK(again.str().find("loaded") == 0);
  fs::remove(file);
  cmd_build_mpa(c, again);
  CHECK(slurp(file) == first);
  fs::remove_all(c.cache_dir);
}

TEST_CASE("run: single vehicle and the intersection") {
  std::ostringstream log;
  const RunConfig one = base("single", 15, "single");
  const auto single = cmd_run(one, log);
  REQUIRE(single.size() == 1);
  CHECK(single[0].normalized_avg_speed == 1.0);
  CHECK(slurp(one.out / "metrics.csv").find("0,inf,1.000000,1,0") != std::string::npos);

  RunConfig c = base("intersection", 20, "intersection");
  c.seeds = {0, 1};
  const auto rows = cmd_run(c, log);
  for (const auto& r : rows) CHECK(r.collisions == 0);
  CHECK(fs::exists(c.out / "run_1.jsonl"));
  CHECK(fs::exists(c.out / "metrics.json"));

  // identical config, identical bytes
  const std::string first = slurp(c.out / "metrics.csv");
  const std::string first_log = slurp(c.out / "run_0.jsonl");
  cmd_run(c, log);
  CHECK(slurp(c.out / "metrics.csv") == first);
  CHECK(slurp(c.out / "run_0.jsonl") == first_log);
}

TEST_CASE("compare-constraints") {
  std::ostringstream log;
  const auto rep = cmd_compare_constraints(base("intersection", 20, "compare"), log);
  REQUIRE(rep.size() == 1);
  CHECK(rep[0].previous.collisions + rep[0].previous.infeasible_steps >= 1);
  CHECK(rep[0].reach.collisions == 0);
  CHECK(rep[0].reach.predicted_intersection.size() == 20);

  // a single vehicle has nothing to be constrained by
  const auto solo = cmd_compare_constraints(base("single", 10, "compare_single"), log);
  CHECK(solo[0].previous.positions == solo[0].reach.positions);
  CHECK(solo[0].previous.collisions == 0);

  RunConfig bad = base("intersection", 5, "compare_bad");
  bad.level_limit = LevelLimit::finite(2);
  CHECK_THROWS_AS(cmd_compare_constraints(bad, log), ConfigError);
}

TEST_CASE("sweep-levels") {
  RunConfig c = base("loop", 8, "sweep");
  c.vehicles = 6;
  c.seeds = {0, 1};
  std::ostringstream log;
  const auto r = cmd_sweep_levels(c, log, {LevelLimit::finite(1), LevelLimit::unbounded()});
  REQUIRE(r.summary.size() == 2);
  CHECK(r.summary[0].levels.q3 == 1);
  CHECK(r.summary[1].level_mismatches == 0);
  CHECK(r.runs.size() == 4);
  const std::string summary = slurp(c.out / "sweep_summary.csv");
  CHECK(summary.rfind("level_limit,runs,speed_q1,speed_median,speed_q3", 0) == 0);
  cmd_sweep_levels(c, log, {LevelLimit::finite(1), LevelLimit::unbounded()});
  CHECK(slurp(c.out / "sweep_summary.csv") == summary);
}

TEST_CASE("executable") {
  const fs::path out = scratch("bin");
  CHECK(run_binary("run --scenario single --steps 5 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(run_binary("run --scenario nowhere.json --out " + out.string()) != 0);
  CHECK(run_binary("run --scenario single --mode sideways") != 0);
  CHECK(run_binary("run --scenario single --level-limit 0") != 0);
  CHECK(run_binary("") != 0);
}
