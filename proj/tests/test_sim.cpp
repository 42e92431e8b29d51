#include "pdmpc/sim.hpp"

#include <doctest.h>

#include <set>

using namespace pdmpc;

namespace {

struct Model {
  Mpa mpa;
  ReachTable table;
};

const Model& default_model() {
  static const Model m = [] {
    Model out;
    out.mpa = build_mpa(MpaConfig{});
    out.table = load_or_build_reach_table(out.mpa, default_cache_dir());
    return out;
  }();
  return m;
}

RunResult run_default(const Scenario& s, int steps, SimOptions o = {}) {
  const auto& m = default_model();
  return run(s, steps, m.mpa, m.table, o, default_cache_dir());
}

// Vehicles queued at standstill on a straight open road.
Scenario queue(int n, double spacing) {
  Scenario s;
  s.name = "queue";
  s.paths.emplace_back(std::vector<Vec2d>{{0, 0}, {30, 0}}, false, 1.5);
  for (int i = 0; i < n; ++i) {
    VehicleSpec v;
    v.initial = {spacing * (n - 1 - i), 0, 0, 0};
    v.initial_state = {0, 2};
    s.vehicles.push_back(v);
  }
  return s;
}

std::string dump(const std::vector<StepRecord>& log) {
  std::string out;
  for (const auto& r : log) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace

TEST_CASE("path") {
  const Path p({{0, 0}, {2, 0}, {2, 2}}, false, 1.0);
  CHECK(p.length() == doctest::Approx(4.0));
  CHECK(p.project(Vec2d(1, 0.3)) == doctest::Approx(1.0));
  CHECK((p.point_at(3) - Vec2d(2, 1)).norm() < 1e-12);
  CHECK(p.heading_at(3) == doctest::Approx(std::numbers::pi / 2));
  CHECK((p.point_at(-1) - Vec2d(-1, 0)).norm() < 1e-12);  // extrapolated

  const Path loop({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, true, 1.0);
  CHECK(loop.length() == doctest::Approx(4.0));
  CHECK((loop.point_at(4.5) - Vec2d(0.5, 0)).norm() < 1e-12);
}

TEST_CASE("scenario JSON and validation") {
  const Scenario s = intersection_scenario();
  CHECK_NOTHROW(validate(s));
  const Scenario back = scenario_from_json(nlohmann::json::parse(to_json(s).dump()));
  CHECK(to_json(back) == to_json(s));
  CHECK(scenario_hash(back) == scenario_hash(s));

  Scenario other = s;
  other.level_limit = LevelLimit::finite(3);
  CHECK(scenario_hash(other) != scenario_hash(s));

  Scenario overlap = queue(2, 0.1);
  CHECK_THROWS_AS(validate(overlap), ScenarioError);
  Scenario bad_path = queue(1, 1);
  bad_path.vehicles[0].path = 3;
  CHECK_THROWS_AS(validate(bad_path), ScenarioError);
  Scenario outside = single_vehicle_scenario();
  outside.vehicles[0].initial.y = 5;
  CHECK_THROWS_AS(validate(outside), ScenarioError);

  CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"name", 3}}), ScenarioError);
  CHECK_THROWS(resolve_scenario("no-such-scenario", 0));
  CHECK(resolve_scenario("loop:6", 1).vehicles.size() == 6);
  CHECK_NOTHROW(validate(loop_scenario(20, 9)));
  CHECK_NOTHROW(validate(random_scenario(6, 2)));
}

TEST_CASE("detect_collisions") {
  const VehicleParams p;
  const PolyUnion a({footprint(Pose(0, 0, 0), p)});
  const PolyUnion far({footprint(Pose(5, 0, 0), p)});
  CHECK(detect_collisions({a, far}).empty());
  const auto same = detect_collisions({a, a, far});
  REQUIRE(same.size() == 1);
  CHECK(same[0] == std::pair<int, int>{0, 1});
  // bodies side by side with 1 mm clearance
  const PolyUnion grazing({footprint(Pose(0, p.body_width + 0.001, 0), p)});
  CHECK(detect_collisions({a, grazing}).empty());
}

TEST_CASE("single vehicle") {
  const auto r = run_default(single_vehicle_scenario(), 20);
  CHECK(r.metrics.normalized_avg_speed == 1.0);
  CHECK(r.metrics.max_levels_observed == 1);
  CHECK(r.metrics.collision_count == 0);
  CHECK(r.log.back().vehicles[0].state.x > 1.0);
  for (const auto& step : r.log) CHECK(step.couplings.empty());
}

TEST_CASE("free-flow run normalizes to one") {
  SimOptions o;
  o.constraints_enabled = false;
  const auto r = run_default(loop_scenario(6, 3), 15, o);
  CHECK(r.metrics.normalized_avg_speed == 1.0);
}

TEST_CASE("levels") {
  Scenario s = queue(4, 0.3);
  s.level_limit = LevelLimit::unbounded();
  const auto& m = default_model();
  Simulation sim(s, m.mpa, m.table);
  const StepRecord first = sim.step();
  // every pair coupled: the priority order is a chain of four
  CHECK(first.couplings.size() == 6);
  CHECK(first.partition.max_levels() == 4);
  CHECK(first.unpartitioned_levels == 4);

  for (const char* limit : {"1", "2", "inf"}) {
    Scenario l = loop_scenario(8, 1);
    l.level_limit = LevelLimit::parse(limit);
    const auto r = run_default(l, 12);
    for (std::size_t k = 0; k < r.log.size(); ++k) {
      const auto& step = r.log[k];
      CHECK(l.level_limit.allows(step.partition.max_levels()));
      if (l.level_limit.is_unbounded()) {
        CHECK(step.partition.max_levels() == step.unpartitioned_levels);
        CHECK(step.unpartitioned_levels == sequential_level_count(step.graph));
      }
      if (std::string(limit) == "1") CHECK(step.partition.max_levels() == 1);
    }
    CHECK(r.metrics.collision_count == 0);
  }
}

TEST_CASE("intersection: reach mode is collision-free") {
  const auto r = run_default(intersection_scenario(), 20);
  CHECK(r.metrics.collision_count == 0);
  for (const auto& step : r.log) CHECK(step.collisions.empty());
}

TEST_CASE("same-level isolation and determinism") {
  Scenario s = loop_scenario(8, 4);
  s.level_limit = LevelLimit::finite(2);
  const auto a = run_default(s, 10);
  SimOptions reversed;
  reversed.reverse_within_level = true;
  const auto b = run_default(s, 10, reversed);
  CHECK(dump(a.log) == dump(b.log));
  const auto c = run_default(s, 10);
  CHECK(dump(a.log) == dump(c.log));
}

TEST_CASE("random scenarios: reach mode is collision-free") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const char* limit : {"1", "2", "inf"}) {
      Scenario s = random_scenario(6, seed);
      s.level_limit = LevelLimit::parse(limit);
      const auto r = run_default(s, 15);
      CHECK(r.metrics.collision_count == 0);
      for (const auto& step : r.log) CHECK(step.predicted_conflicts.empty());
    }
  }
}

TEST_CASE("reach mode: executed plans never overlap, fallbacks included") {
  // Failed vehicles fall back; everyone coupled to them avoids the fallback,
  // so the executed plans stay disjoint over the whole horizon.
  Scenario s = loop_scenario(12, 5);
  s.level_limit = LevelLimit::finite(1);
  const auto r = run_default(s, 25);
  int failed = 0;
  for (const auto& step : r.log) {
    CHECK(step.predicted_conflicts.empty());
    for (const auto& v : step.vehicles) failed += v.status == PlanStatus::Infeasible;
  }
  CHECK(failed > 0);
  CHECK(r.metrics.collision_count == 0);
  CHECK(r.metrics.normalized_avg_speed > 0);
}

TEST_CASE("step record JSON") {
  const auto& m = default_model();
  Simulation sim(intersection_scenario(), m.mpa, m.table);
  const auto j = to_json(sim.step());
  CHECK(j.at("step") == 0);
  CHECK(j.at("vehicles").size() == 3);
  CHECK(j.contains("couplings"));
  CHECK(j.contains("collisions"));
}
