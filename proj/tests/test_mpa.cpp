#include "mpa_oracle.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cstdlib>
#include <numbers>

using namespace pdmpc;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pdmpc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

PolyUnion inflated_footprint(const Mpa& mpa) {
  return PolyUnion({inflate(footprint(Pose(), mpa.params()), mpa.config().margin)});
}

bool mutually_contained(const PolyUnion& a, const PolyUnion& b) {
  return contains(a, b) && contains(b, a);
}

}  // namespace

TEST_CASE("automaton transitions") {
  const Mpa mpa = build_mpa(oracle::small_config(2));
  CHECK(mpa.state_count() == 9);
  for (int i = 0; i < mpa.state_count(); ++i) {
    const MpaState s = mpa.state(i);
    // neighbors within one level in both coordinates
    const int ds = (s.speed_index == 1) ? 3 : 2;
    const int dj = (s.steering_index == 1) ? 3 : 2;
    const auto& out = mpa.outgoing(s);
    CHECK(out.size() == static_cast<std::size_t>(ds * dj));
    CHECK(out.size() >= 1);
    CHECK(out.size() <= 9);
    for (int id : out) {
      const auto& m = mpa.primitive(id);
      CHECK(m.from == s);
      CHECK(std::abs(m.to.speed_index - s.speed_index) <= 1);
      CHECK(std::abs(m.to.steering_index - s.steering_index) <= 1);
    }
  }
  CHECK(mpa.brake_target({2, 0}) == MpaState{1, 1});
  CHECK(mpa.brake_target({0, 1}) == MpaState{0, 1});
}

TEST_CASE("invalid automaton settings") {
  auto c = oracle::small_config(2);
  c.dt = 0;
  CHECK_THROWS(build_mpa(c));
  c = oracle::small_config(0);
  CHECK_THROWS(build_mpa(c));
  c = oracle::small_config(2);
  c.speed_levels = {0.5, 1.0};  // no standstill level
  CHECK_THROWS(build_mpa(c));
}

TEST_CASE("standstill primitive") {
  const Mpa mpa = build_mpa(oracle::small_config(2));
  const MpaState rest{0, mpa.straight_steering_index()};
  const auto id = mpa.find_primitive(rest, rest);
  REQUIRE(id.has_value());
  const auto& m = mpa.primitive(*id);
  CHECK(mutually_contained(m.sweep, inflated_footprint(mpa)));
  CHECK(m.end_pose.translation().norm() == 0);
}

TEST_CASE("straight primitive sweeps the analytic rectangle") {
  MpaConfig c;
  c.speed_levels = {0.0, 1.0};
  c.steering_levels = {-0.2, 0.0, 0.2};
  c.horizon = 1;
  const Mpa mpa = build_mpa(c);
  const MpaState cruise{1, 1};
  const auto& m = mpa.primitive(*mpa.find_primitive(cruise, cruise));
  CHECK(m.end_pose.x() == doctest::Approx(0.2));
  const auto rect = ConvexPolygon::box(Vec2d(-0.11, -0.0535), Vec2d(0.31, 0.0535));
  CHECK(contains(m.sweep, rect));
  CHECK(contains(m.raw_sweep, rect));
  for (const auto& q : oracle::samples(rect)) CHECK(oracle::inside(m.raw_sweep, q, 1e-9));
}

TEST_CASE("sweep covers every sampled footprint") {
  const Mpa mpa = build_mpa(oracle::small_config(1));
  for (const auto& m : mpa.primitives()) {
    for (const auto& s : m.samples) {
      const auto f = footprint(s, mpa.params());
      CHECK(contains(m.raw_sweep, f));
      // margin ball around every corner
      for (Eigen::Index k = 0; k < f.size(); ++k)
        for (int a = 0; a < 16; ++a) {
          const double t = a * std::numbers::pi / 8;
          const Vec2d q = f.vertex(k) + mpa.config().margin * Vec2d(std::cos(t), std::sin(t));
          CHECK(oracle::inside(m.sweep, q, 1e-9));
        }
    }
  }
}

TEST_CASE("reach table: horizon 1 is the union of outgoing sweeps") {
  const Mpa mpa = build_mpa(oracle::small_config(1));
  const ReachTable t = build_reach_table(mpa);
  CHECK(t.horizon() == 1);
  CHECK(t.state_count() == 9);
  for (int i = 0; i < mpa.state_count(); ++i) {
    const MpaState s = mpa.state(i);
    CHECK(t.entries()[i].size() == 1);
    PolyUnion expected;
    for (int id : mpa.outgoing(s)) expected.append(mpa.primitive(id).sweep);
    CHECK(mutually_contained(t.entry(s, 0), expected));
  }
  CHECK_THROWS_AS(t.entry({0, 0}, 1), std::out_of_range);
}

TEST_CASE("reach table: standstill-only automaton") {
  MpaConfig c;
  c.speed_levels = {0.0};
  c.steering_levels = {0.0};
  c.horizon = 4;
  const Mpa mpa = build_mpa(c);
  const ReachTable t = build_reach_table(mpa);
  for (int h = 0; h < 4; ++h)
    CHECK(mutually_contained(t.entry({0, 0}, h), inflated_footprint(mpa)));
}

TEST_CASE("reach table matches exhaustive enumeration") {
  MpaConfig c;
  c.speed_levels = {0.0, 0.75};
  c.steering_levels = {0.0};
  c.horizon = 3;
  const Mpa mpa = build_mpa(c);
  REQUIRE(mpa.state_count() == 2);
  const ReachTable t = build_reach_table(mpa);

  for (int i = 0; i < mpa.state_count(); ++i) {
    const MpaState s = mpa.state(i);
    std::vector<PolyUnion> brute(3);
    oracle::enumerate_sequences(mpa, s, 3, [&](int h, const Pose& pose, const MotionPrimitive& m) {
      brute[h].append(apply_transform(m.sweep, pose));
    });
    for (int h = 0; h < 3; ++h) {
      // sound: every sequence is covered
      CHECK(contains(t.entry(s, h), brute[h]));
      // tight up to the pose-merging slack
      CHECK(contains(inflate(brute[h], 0.02), t.entry(s, h)));
    }
  }
}

TEST_CASE("reachable_set placement") {
  const Mpa mpa = build_mpa(oracle::small_config(2));
  const ReachTable t = build_reach_table(mpa);
  const MpaState s{1, 1};
  CHECK(reachable_set(t, s, Pose(), 1) == t.entry(s, 1));

  const auto moved = reachable_set(t, s, Pose(1, 1, 0), 1);
  for (std::size_t p = 0; p < moved.size(); ++p) {
    const Points2<double> d =
        moved.parts()[p].vertices() - t.entry(s, 1).parts()[p].vertices();
    CHECK((d.colwise() - Vec2d(1, 1)).cwiseAbs().maxCoeff() < 1e-12);
  }

  const auto turned = reachable_set(t, s, Pose(0, 0, std::numbers::pi / 2), 0);
  const Vec2d v = t.entry(s, 0).parts()[0].vertex(0);
  CHECK((turned.parts()[0].vertex(0) - Vec2d(-v.y(), v.x())).norm() < 1e-12);
}

TEST_CASE("reach table cache") {
  const auto dir = temp_dir("cache");
  const Mpa mpa = build_mpa(oracle::small_config(2));
  bool rebuilt = false;
  const ReachTable a = load_or_build_reach_table(mpa, dir, {}, &rebuilt);
  CHECK(rebuilt);
  const ReachTable b = load_or_build_reach_table(mpa, dir, {}, &rebuilt);
  CHECK_FALSE(rebuilt);
  CHECK(a == b);
  CHECK(a.key() == reach_table_key(mpa.config(), {}));

  // same settings, same key; different settings, different key
  CHECK(reach_table_key(oracle::small_config(2), {}) == a.key());
  CHECK(reach_table_key(oracle::small_config(3), {}) != a.key());

  const auto file = dir / ("reach_" + a.key() + ".cbor");
  CHECK(std::filesystem::exists(file));
  CHECK_FALSE(load_reach_table(file, "other").has_value());
  CHECK_FALSE(load_reach_table(dir / "missing.cbor", a.key()).has_value());
  std::filesystem::remove_all(dir);
}
