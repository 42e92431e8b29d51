#pragma once

// Planar convex-polygon primitives used for every occupancy test: polygons,
// unions of polygons, rigid transforms, separating-axis intersection, vertex
// offset inflation and union containment.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmpc {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Column-per-vertex storage.
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
struct GeometryTolerance {
  /// Degeneracy and touching tolerance (meters).
  static constexpr Scalar linear = Scalar(1e-9);
  /// Pieces left over by containment clipping below this area are ignored.
  static constexpr Scalar area = Scalar(1e-10);
};

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar normalize_angle(Scalar angle) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar two_pi = 2 * pi;
  if (angle > -pi && angle <= pi) return angle;
  angle = std::fmod(angle + pi, two_pi);
  if (angle <= 0) angle += two_pi;
  return angle - pi;
}

template <typename Scalar>
Scalar cross2(const Vec2<Scalar>& a, const Vec2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Counterclockwise rotation about the origin followed by a translation.
/// Also serves as a vehicle pose (position + yaw).
template <typename Scalar>
class RigidTransformT {
 public:
  using Point = Vec2<Scalar>;

  RigidTransformT() : translation_(Point::Zero()), rotation_(0) {}
  RigidTransformT(const Point& translation, Scalar rotation)
      : translation_(translation), rotation_(normalize_angle(rotation)) {}
  RigidTransformT(Scalar x, Scalar y, Scalar rotation)
      : RigidTransformT(Point(x, y), rotation) {}

  static RigidTransformT identity() { return {}; }

  const Point& translation() const { return translation_; }
  Scalar rotation() const { return rotation_; }
  Scalar x() const { return translation_.x(); }
  Scalar y() const { return translation_.y(); }
  Scalar yaw() const { return rotation_; }

  Eigen::Matrix<Scalar, 2, 2> rotation_matrix() const {
    return Eigen::Rotation2D<Scalar>(rotation_).toRotationMatrix();
  }

  Point apply(const Point& p) const {
    return rotation_matrix() * p + translation_;
  }

  Points2<Scalar> apply(const Points2<Scalar>& pts) const {
    return (rotation_matrix() * pts).colwise() + translation_;
  }

  /// (this * other)(p) == this(other(p)): `other` expressed in this frame.
  RigidTransformT operator*(const RigidTransformT& other) const {
    return {apply(other.translation_), rotation_ + other.rotation_};
  }

  RigidTransformT inverse() const {
    const Eigen::Matrix<Scalar, 2, 2> rt = rotation_matrix().transpose();
    return {-(rt * translation_), -rotation_};
  }

 private:
  Point translation_;
  Scalar rotation_;
};

/// Strictly convex polygon with counterclockwise vertices.
template <typename Scalar>
class ConvexPolygonT {
 public:
  using Point = Vec2<Scalar>;
  using Matrix = Points2<Scalar>;
  using Box = Eigen::AlignedBox<Scalar, 2>;

  explicit ConvexPolygonT(Matrix vertices) : vertices_(std::move(vertices)) {
    validate();
    update_bounds();
  }

  explicit ConvexPolygonT(const std::vector<Point>& vertices)
      : ConvexPolygonT(to_matrix(vertices)) {}

  /// Convex hull of a point cloud; nullopt when the hull is degenerate.
  static std::optional<ConvexPolygonT> try_hull(std::vector<Point> pts);

  static ConvexPolygonT hull(std::vector<Point> pts) {
    auto h = try_hull(std::move(pts));
    if (!h) throw GeometryError("convex hull is degenerate");
    return *std::move(h);
  }

  /// Axis-aligned rectangle centered at the origin.
  static ConvexPolygonT rectangle(Scalar length, Scalar width) {
    Matrix v(2, 4);
    const Scalar hl = length / 2, hw = width / 2;
    v << -hl, hl, hl, -hl,
         -hw, -hw, hw, hw;
    return ConvexPolygonT(std::move(v));
  }

  static ConvexPolygonT box(const Point& lo, const Point& hi) {
    Matrix v(2, 4);
    v << lo.x(), hi.x(), hi.x(), lo.x(),
         lo.y(), lo.y(), hi.y(), hi.y();
    return ConvexPolygonT(std::move(v));
  }

  /// Skips validation; only for results of validity-preserving maps.
  static ConvexPolygonT from_trusted(Matrix vertices) {
    return ConvexPolygonT(std::move(vertices), Trusted{});
  }

  const Matrix& vertices() const { return vertices_; }
  Eigen::Index size() const { return vertices_.cols(); }
  Point vertex(Eigen::Index i) const { return vertices_.col(i); }
  Point edge(Eigen::Index i) const {
    return vertices_.col((i + 1) % size()) - vertices_.col(i);
  }
  const Box& bounds() const { return bounds_; }

  Scalar area() const {
    Scalar a = 0;
    for (Eigen::Index i = 0; i < size(); ++i)
      a += cross2<Scalar>(vertex(i), vertex((i + 1) % size()));
    return a / 2;
  }

  Point centroid() const { return vertices_.rowwise().mean(); }

  /// Closed containment with tolerance `tol` outward.
  bool contains(const Point& p,
                Scalar tol = GeometryTolerance<Scalar>::linear) const {
    if (!bounds_.isEmpty()) {
      if (p.x() < bounds_.min().x() - tol || p.x() > bounds_.max().x() + tol ||
          p.y() < bounds_.min().y() - tol || p.y() > bounds_.max().y() + tol)
        return false;
    }
    for (Eigen::Index i = 0; i < size(); ++i) {
      const Point e = edge(i);
      const Scalar len = e.norm();
      if (cross2<Scalar>(e, Point(p - vertex(i))) < -tol * len) return false;
    }
    return true;
  }

  bool operator==(const ConvexPolygonT& o) const {
    return vertices_.cols() == o.vertices_.cols() && vertices_ == o.vertices_;
  }

 private:
  struct Trusted {};
  ConvexPolygonT(Matrix vertices, Trusted) : vertices_(std::move(vertices)) {
    update_bounds();
  }

  static Matrix to_matrix(const std::vector<Point>& pts) {
    Matrix m(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
      m.col(static_cast<Eigen::Index>(i)) = pts[i];
    return m;
  }

  void validate() const {
    const Eigen::Index n = size();
    if (n < 3) throw GeometryError("polygon needs at least 3 vertices");
    if (!vertices_.allFinite()) throw GeometryError("non-finite polygon vertex");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (edge(i).norm() <= GeometryTolerance<Scalar>::linear)
        throw GeometryError("duplicate consecutive polygon vertices");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point e0 = edge(i);
      const Point e1 = edge((i + 1) % n);
      if (cross2<Scalar>(e0, e1) <= Scalar(1e-12) * e0.norm() * e1.norm())
        throw GeometryError("polygon is not strictly convex counterclockwise");
    }
  }

  void update_bounds() {
    bounds_ = Box(vertices_.rowwise().minCoeff(), vertices_.rowwise().maxCoeff());
  }

  Matrix vertices_;
  Box bounds_;
};

template <typename Scalar>
std::optional<ConvexPolygonT<Scalar>> ConvexPolygonT<Scalar>::try_hull(
    std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) {
                          return (a - b).norm() <=
                                 GeometryTolerance<Scalar>::linear;
                        }),
            pts.end());
  if (pts.size() < 3) return std::nullopt;

  // Andrew's monotone chain, collinear points dropped.
  std::vector<Point> h(2 * pts.size());
  std::size_t k = 0;
  auto turn = [](const Point& o, const Point& a, const Point& b) {
    return cross2<Scalar>(Point(a - o), Point(b - o));
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && turn(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && turn(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  // Drop nearly collinear or nearly coincident vertices the strict
  // validator would reject.
  for (bool changed = true; changed && h.size() >= 3;) {
    changed = false;
    for (std::size_t i = 0; i < h.size() && h.size() >= 3; ++i) {
      const Point& prev = h[(i + h.size() - 1) % h.size()];
      const Point& next = h[(i + 1) % h.size()];
      const Point e0 = h[i] - prev, e1 = next - h[i];
      if (e0.norm() <= GeometryTolerance<Scalar>::linear ||
          cross2<Scalar>(e0, e1) <= Scalar(4e-12) * e0.norm() * e1.norm()) {
        h.erase(h.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (h.size() < 3) return std::nullopt;
  try {
    return ConvexPolygonT(h);
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

/// Union of convex parts; empty means the empty set.
template <typename Scalar>
class PolyUnionT {
 public:
  using Polygon = ConvexPolygonT<Scalar>;
  using Box = typename Polygon::Box;

  PolyUnionT() = default;
  explicit PolyUnionT(std::vector<Polygon> parts) : parts_(std::move(parts)) {
    for (const auto& p : parts_) bounds_.extend(p.bounds());
  }

  void add(Polygon p) {
    bounds_.extend(p.bounds());
    parts_.push_back(std::move(p));
  }
  void append(const PolyUnionT& other) {
    for (const auto& p : other.parts_) add(p);
  }

  const std::vector<Polygon>& parts() const { return parts_; }
  std::size_t size() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  const Box& bounds() const { return bounds_; }

  bool contains(const Vec2<Scalar>& p,
                Scalar tol = GeometryTolerance<Scalar>::linear) const {
    for (const auto& part : parts_)
      if (part.contains(p, tol)) return true;
    return false;
  }

  bool operator==(const PolyUnionT& o) const { return parts_ == o.parts_; }

 private:
  std::vector<Polygon> parts_;
  Box bounds_;  // default-constructed AlignedBox is empty
};

namespace detail {

template <typename Scalar>
bool boxes_overlap(const Eigen::AlignedBox<Scalar, 2>& a,
                   const Eigen::AlignedBox<Scalar, 2>& b, Scalar tol) {
  return a.min().x() <= b.max().x() + tol && b.min().x() <= a.max().x() + tol &&
         a.min().y() <= b.max().y() + tol && b.min().y() <= a.max().y() + tol;
}

// True when some edge normal of `a` separates the two vertex sets by more
// than the tolerance.
template <typename Scalar>
bool has_separating_edge(const ConvexPolygonT<Scalar>& a,
                         const ConvexPolygonT<Scalar>& b) {
  // For a counterclockwise loop, (e.y, -e.x) is the outward normal of edge i
  // and vertex i attains the maximum of a along it.
  const auto& vb = b.vertices();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Vec2<Scalar> e = a.edge(i);
    const Scalar nx = e.y(), ny = -e.x();
    const Scalar a_max = nx * a.vertex(i).x() + ny * a.vertex(i).y();
    const Scalar limit = a_max + GeometryTolerance<Scalar>::linear * e.norm();
    bool separated = true;
    for (Eigen::Index k = 0; k < vb.cols() && separated; ++k)
      separated = nx * vb(0, k) + ny * vb(1, k) > limit;
    if (separated) return true;
  }
  return false;
}

// Keeps the part of a convex vertex loop where n.x <= c (Sutherland-Hodgman
// against one half-plane).
template <typename Scalar>
std::vector<Vec2<Scalar>> clip_halfplane(const std::vector<Vec2<Scalar>>& poly,
                                         const Vec2<Scalar>& n, Scalar c) {
  std::vector<Vec2<Scalar>> out;
  const std::size_t m = poly.size();
  if (m == 0) return out;
  out.reserve(m + 1);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2<Scalar>& p = poly[i];
    const Vec2<Scalar>& q = poly[(i + 1) % m];
    const Scalar dp = n.dot(p) - c;
    const Scalar dq = n.dot(q) - c;
    if (dp <= 0) out.push_back(p);
    if ((dp < 0 && dq > 0) || (dp > 0 && dq < 0)) {
      const Scalar t = dp / (dp - dq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

template <typename Scalar>
Scalar loop_area(const std::vector<Vec2<Scalar>>& poly) {
  Scalar a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    a += cross2<Scalar>(poly[i], poly[(i + 1) % poly.size()]);
  return a / 2;
}

// Convex pieces of `piece` lying outside the convex polygon `hole`.
template <typename Scalar>
void subtract_convex(const std::vector<Vec2<Scalar>>& piece,
                     const ConvexPolygonT<Scalar>& hole,
                     std::vector<std::vector<Vec2<Scalar>>>& out) {
  std::vector<Vec2<Scalar>> rest = piece;
  for (Eigen::Index i = 0; i < hole.size() && !rest.empty(); ++i) {
    const Vec2<Scalar> e = hole.edge(i);
    const Vec2<Scalar> n = Vec2<Scalar>(e.y(), -e.x()).normalized();
    const Scalar c = n.dot(hole.vertex(i));
    auto outside = clip_halfplane<Scalar>(rest, Vec2<Scalar>(-n), -c);
    if (outside.size() >= 3 &&
        loop_area(outside) > GeometryTolerance<Scalar>::area)
      out.push_back(std::move(outside));
    rest = clip_halfplane<Scalar>(rest, n, c);
  }
}

}  // namespace detail

/// Separating-axis test over the edge normals of both polygons. Touching
/// boundaries count as intersecting.
template <typename Scalar>
bool intersects(const ConvexPolygonT<Scalar>& a, const ConvexPolygonT<Scalar>& b) {
  if (!detail::boxes_overlap(a.bounds(), b.bounds(),
                             GeometryTolerance<Scalar>::linear))
    return false;
  return !detail::has_separating_edge(a, b) && !detail::has_separating_edge(b, a);
}

template <typename Scalar>
bool union_intersects(const PolyUnionT<Scalar>& a, const ConvexPolygonT<Scalar>& b) {
  if (a.empty() ||
      !detail::boxes_overlap(a.bounds(), b.bounds(), GeometryTolerance<Scalar>::linear))
    return false;
  for (const auto& p : a.parts())
    if (intersects(p, b)) return true;
  return false;
}

template <typename Scalar>
bool union_intersects(const PolyUnionT<Scalar>& a, const PolyUnionT<Scalar>& b) {
  if (a.empty() || b.empty() ||
      !detail::boxes_overlap(a.bounds(), b.bounds(), GeometryTolerance<Scalar>::linear))
    return false;
  for (const auto& q : b.parts())
    if (union_intersects(a, q)) return true;
  return false;
}

template <typename Scalar>
ConvexPolygonT<Scalar> apply_transform(const ConvexPolygonT<Scalar>& p,
                                       const RigidTransformT<Scalar>& t) {
  return ConvexPolygonT<Scalar>::from_trusted(t.apply(p.vertices()));
}

template <typename Scalar>
PolyUnionT<Scalar> apply_transform(const PolyUnionT<Scalar>& u,
                                   const RigidTransformT<Scalar>& t) {
  std::vector<ConvexPolygonT<Scalar>> parts;
  parts.reserve(u.size());
  for (const auto& p : u.parts()) parts.push_back(apply_transform(p, t));
  return PolyUnionT<Scalar>(std::move(parts));
}

/// Pushes every edge outward by `margin`; each vertex moves along the
/// bisector of its adjacent edge normals. The result contains every point
/// within `margin` of the original polygon.
template <typename Scalar>
ConvexPolygonT<Scalar> inflate(const ConvexPolygonT<Scalar>& p, Scalar margin) {
  if (!(margin >= 0)) throw GeometryError("inflation margin must be non-negative");
  if (margin == 0) return p;
  const Eigen::Index n = p.size();
  Points2<Scalar> out(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2<Scalar> e_prev = p.edge((i + n - 1) % n);
    const Vec2<Scalar> e_next = p.edge(i);
    const Vec2<Scalar> n0 = Vec2<Scalar>(e_prev.y(), -e_prev.x()).normalized();
    const Vec2<Scalar> n1 = Vec2<Scalar>(e_next.y(), -e_next.x()).normalized();
    out.col(i) = p.vertex(i) + margin * (n0 + n1) / (1 + n0.dot(n1));
  }
  return ConvexPolygonT<Scalar>::from_trusted(std::move(out));
}

template <typename Scalar>
PolyUnionT<Scalar> inflate(const PolyUnionT<Scalar>& u, Scalar margin) {
  if (!(margin >= 0)) throw GeometryError("inflation margin must be non-negative");
  if (margin == 0) return u;
  std::vector<ConvexPolygonT<Scalar>> parts;
  parts.reserve(u.size());
  for (const auto& p : u.parts()) parts.push_back(inflate(p, margin));
  return PolyUnionT<Scalar>(std::move(parts));
}

/// True iff `inner` minus the union is empty, decided by clipping `inner`
/// against every part in turn.
template <typename Scalar>
bool contains(const PolyUnionT<Scalar>& outer, const ConvexPolygonT<Scalar>& inner) {
  if (outer.empty()) return false;
  if (!outer.bounds().contains(inner.bounds())) return false;
  // Common case: one part holds every vertex.
  for (const auto& part : outer.parts()) {
    if (!part.bounds().contains(inner.bounds())) continue;
    bool all = true;
    for (Eigen::Index i = 0; i < inner.size() && all; ++i)
      all = part.contains(inner.vertex(i), Scalar(0));
    if (all) return true;
  }
  std::vector<std::vector<Vec2<Scalar>>> pieces(1);
  for (Eigen::Index i = 0; i < inner.size(); ++i) pieces[0].push_back(inner.vertex(i));
  for (const auto& part : outer.parts()) {
    if (!detail::boxes_overlap(part.bounds(), inner.bounds(),
                               GeometryTolerance<Scalar>::linear))
      continue;
    std::vector<std::vector<Vec2<Scalar>>> next;
    for (const auto& piece : pieces) detail::subtract_convex(piece, part, next);
    pieces = std::move(next);
    if (pieces.empty()) return true;
  }
  return pieces.empty();
}

template <typename Scalar>
bool contains(const PolyUnionT<Scalar>& outer, const PolyUnionT<Scalar>& inner) {
  for (const auto& p : inner.parts())
    if (!contains(outer, p)) return false;
  return true;
}

using RigidTransform = RigidTransformT<double>;
using Pose = RigidTransformT<double>;
using ConvexPolygon = ConvexPolygonT<double>;
using PolyUnion = PolyUnionT<double>;
using Vec2d = Vec2<double>;

}  // namespace pdmpc
