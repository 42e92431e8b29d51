#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace pdmpc;

namespace {

ConvexPolygon unit_square(double x = 0, double y = 0) {
  return ConvexPolygon::box(Vec2d(x, y), Vec2d(x + 1, y + 1));
}

// True if some grid point lies in both polygons.
bool sampled_overlap(const PolyUnion& a, const PolyUnion& b, int n = 100) {
  Eigen::AlignedBox2d box = a.bounds();
  box.extend(b.bounds());
  for (const auto& q : oracle::grid(box.min(), box.max(), n))
    if (oracle::inside(a, q) && oracle::inside(b, q)) return true;
  return false;
}

}  // namespace

TEST_CASE("polygon construction") {
  CHECK_THROWS_AS(ConvexPolygon(std::vector<Vec2d>{{0, 0}, {1, 0}}), GeometryError);
  // clockwise
  CHECK_THROWS_AS(ConvexPolygon(std::vector<Vec2d>{{0, 0}, {0, 1}, {1, 1}, {1, 0}}),
                  GeometryError);
  CHECK_FALSE(ConvexPolygon::try_hull({{0, 0}, {1, 1}, {2, 2}}).has_value());

  const auto h = ConvexPolygon::hull({{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 0}});
  CHECK(h.size() == 4);
  CHECK(h.area() == doctest::Approx(4.0));
  CHECK(unit_square().area() == doctest::Approx(1.0));
}

TEST_CASE("intersects: examples") {
  CHECK_FALSE(intersects(unit_square(), unit_square(2, 0)));
  CHECK(intersects(unit_square(), unit_square()));
  CHECK(intersects(unit_square(), unit_square(0.5, 0.5)));
  CHECK(sampled_overlap(PolyUnion({unit_square()}), PolyUnion({unit_square(0.5, 0.5)})));
}

TEST_CASE("intersects agrees with point sampling") {
  std::mt19937_64 rng(7);
  int overlaps = 0;
  for (int k = 0; k < 300; ++k) {
    const auto a = oracle::random_polygon(rng, 1.5, 1.0);
    const auto b = oracle::random_polygon(rng, 1.5, 1.0);
    const bool sat = intersects(a, b);
    CHECK(sat == intersects(b, a));
    // A sampled common point proves overlap; the converse can miss slivers.
    if (sampled_overlap(PolyUnion({a}), PolyUnion({b}), 60)) {
      CHECK(sat);
      ++overlaps;
    }
    if (!sat) CHECK_FALSE(sampled_overlap(PolyUnion({a}), PolyUnion({b}), 60));
  }
  CHECK(overlaps > 30);
}

TEST_CASE("union_intersects") {
  const PolyUnion empty;
  CHECK_FALSE(union_intersects(empty, unit_square()));
  CHECK_FALSE(union_intersects(PolyUnion({unit_square()}), PolyUnion({unit_square(4, 0)})));

  const PolyUnion two({unit_square(), unit_square(3, 0)});
  const PolyUnion other({unit_square(3.5, 0.5), unit_square(10, 10)});
  CHECK(union_intersects(two, other));
  CHECK(sampled_overlap(two, other));
  CHECK_FALSE(union_intersects(PolyUnion({unit_square()}), other));
}

TEST_CASE("apply_transform") {
  const PolyUnion u({unit_square(), unit_square(3, 1)});
  CHECK(apply_transform(u, Pose::identity()) == u);

  const auto r = apply_transform(unit_square(), Pose(0, 0, std::numbers::pi / 2));
  bool found = false;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if ((r.vertex(i) - Vec2d(0, 1)).norm() < 1e-12) found = true;
  CHECK(found);
  CHECK(r.area() == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int k = 0; k < 50; ++k) {
    const PolyUnion v({oracle::random_polygon(rng, 2, 1), oracle::random_polygon(rng, 2, 1)});
    const Pose t(d(rng), d(rng), d(rng));
    const PolyUnion back = apply_transform(apply_transform(v, t), t.inverse());
    for (std::size_t p = 0; p < v.size(); ++p)
      CHECK((back.parts()[p].vertices() - v.parts()[p].vertices()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("inflate") {
  const auto sq = unit_square();
  CHECK(inflate(sq, 0.0) == sq);
  CHECK_THROWS_AS(inflate(sq, -0.1), GeometryError);

  const auto big = inflate(sq, 0.1);
  CHECK(contains(PolyUnion({big}), sq));

  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    const auto p = oracle::random_polygon(rng, 1, 1);
    const auto q = inflate(p, 0.1);
    Eigen::AlignedBox2d box = p.bounds();
    box.extend(p.bounds().min() - Vec2d(0.2, 0.2));
    box.extend(p.bounds().max() + Vec2d(0.2, 0.2));
    for (const auto& pt : oracle::grid(box.min(), box.max(), 80)) {
      if (oracle::inside(p, pt) || oracle::distance_to_boundary(p, pt) <= 0.1)
        CHECK(oracle::inside(q, pt, 1e-9));
    }
  }
}

TEST_CASE("contains") {
  const auto sq = unit_square();
  CHECK(contains(PolyUnion({sq}), sq));
  CHECK(contains(PolyUnion({ConvexPolygon::box(Vec2d(-2, -2), Vec2d(2, 2))}),
                 ConvexPolygon::box(Vec2d(-0.5, -0.5), Vec2d(0.5, 0.5))));

  // Two touching squares cover a rectangle that spans both.
  const PolyUnion pair({unit_square(), unit_square(1, 0)});
  CHECK(contains(pair, ConvexPolygon::box(Vec2d(0.2, 0.2), Vec2d(1.8, 0.8))));

  // Straddles the outer boundary: a sampled point of the inner square is
  // outside the union.
  const auto straddle = ConvexPolygon::box(Vec2d(1.5, 0.5), Vec2d(2.5, 0.9));
  CHECK_FALSE(contains(pair, straddle));
  bool outside = false;
  for (const auto& q : oracle::samples(straddle))
    if (!oracle::inside(pair, q)) outside = true;
  CHECK(outside);

  // L-shaped union with a notch; triangle across the notch is not covered.
  const PolyUnion ell({ConvexPolygon::box(Vec2d(0, 0), Vec2d(2, 1)),
                       ConvexPolygon::box(Vec2d(0, 1), Vec2d(1, 2))});
  CHECK_FALSE(contains(ell, ConvexPolygon(std::vector<Vec2d>{{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}})));
  CHECK(contains(ell, ConvexPolygon(std::vector<Vec2d>{{0.2, 0.2}, {1.8, 0.2}, {0.2, 1.8}})));
}

TEST_CASE("contains agrees with point sampling") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const PolyUnion outer({oracle::random_polygon(rng, 0.6, 1.2), oracle::random_polygon(rng, 0.6, 1.2)});
    const auto inner = oracle::random_polygon(rng, 0.6, 0.4);
    bool all_in = true;
    for (const auto& q : oracle::samples(inner, 16)) all_in = all_in && oracle::inside(outer, q, 1e-9);
    // Containment implies every sample is inside; a sample outside refutes it.
    if (contains(outer, inner)) CHECK(all_in);
    if (!all_in) CHECK_FALSE(contains(outer, inner));
  }
}

TEST_CASE("normalize_angle") {
  CHECK(normalize_angle(3 * std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_angle(0.5) == doctest::Approx(0.5));
}
