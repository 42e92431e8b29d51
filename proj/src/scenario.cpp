#include "pdmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace pdmpc {

// ---------------------------------------------------------------------------
// Path

Path::Path(std::vector<Vec2d> points, bool closed, double speed_limit)
    : points_(std::move(points)), closed_(closed), speed_limit_(speed_limit) {
  if (points_.size() < 2) throw ScenarioError("a path needs at least two points");
  if (!(speed_limit_ > 0)) throw ScenarioError("path speed limit must be positive");
  if (closed_) points_.push_back(points_.front());
  cumulative_.push_back(0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double len = (points_[i] - points_[i - 1]).norm();
    if (len <= 0) throw ScenarioError("path has repeated points");
    cumulative_.push_back(cumulative_.back() + len);
  }
}

std::size_t Path::segment_at(double& s) const {
  const double total = length();
  if (closed_) {
    s = std::fmod(s, total);
    if (s < 0) s += total;
  }
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t seg = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(seg, points_.size() - 2);
}

double Path::project(const Vec2d& p) const {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0;
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2d a = points_[i];
    const Vec2d ab = points_[i + 1] - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const double d = (a + t * ab - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_s = cumulative_[i] + t * ab.norm();
    }
  }
  return best_s;
}

Vec2d Path::point_at(double s) const {
  const std::size_t seg = segment_at(s);
  const Vec2d a = points_[seg];
  const Vec2d dir = (points_[seg + 1] - a).normalized();
  return a + (s - cumulative_[seg]) * dir;
}

double Path::heading_at(double s) const {
  const std::size_t seg = segment_at(s);
  const Vec2d d = points_[seg + 1] - points_[seg];
  return std::atan2(d.y(), d.x());
}

// ---------------------------------------------------------------------------
// Modes

std::string to_string(ConstraintMode mode) {
  return mode == ConstraintMode::ReachableSets ? "reach" : "prev";
}

ConstraintMode parse_constraint_mode(const std::string& text) {
  if (text == "reach") return ConstraintMode::ReachableSets;
  if (text == "prev") return ConstraintMode::PreviousTrajectory;
  throw ScenarioError("unknown constraint mode '" + text + "' (expected reach|prev)");
}

// ---------------------------------------------------------------------------
// Validation and JSON

void validate(const Scenario& s) {
  try {
    build_mpa(s.mpa);
  } catch (const std::exception& e) {
    throw ScenarioError(std::string("invalid automaton settings: ") + e.what());
  }
  if (s.vehicles.empty()) throw ScenarioError("scenario has no vehicles");
  std::vector<ConvexPolygon> fps;
  for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
    const auto& spec = s.vehicles[v];
    const std::string who = "vehicle " + std::to_string(v);
    if (spec.path < 0 || spec.path >= static_cast<int>(s.paths.size()))
      throw ScenarioError(who + " references an unknown path");
    if (spec.initial_state.speed_index < 0 ||
        spec.initial_state.speed_index >= static_cast<int>(s.mpa.speed_levels.size()) ||
        spec.initial_state.steering_index < 0 ||
        spec.initial_state.steering_index >= static_cast<int>(s.mpa.steering_levels.size()))
      throw ScenarioError(who + " has an invalid automaton state");
    if (std::abs(spec.initial.speed - s.mpa.speed_levels[spec.initial_state.speed_index]) > 1e-9)
      throw ScenarioError(who + " speed does not match its speed level");
    fps.push_back(footprint(spec.initial, s.params()));
    if (!s.drivable_area.empty() && !contains(s.drivable_area, fps.back()))
      throw ScenarioError(who + " starts outside the drivable area");
  }
  for (std::size_t a = 0; a < fps.size(); ++a)
    for (std::size_t b = a + 1; b < fps.size(); ++b)
      if (intersects(fps[a], fps[b]))
        throw ScenarioError("initial footprints of vehicles " + std::to_string(a) + " and " +
                            std::to_string(b) + " overlap");
}

namespace {

nlohmann::json polygon_json(const ConvexPolygon& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) arr.push_back({p.vertex(i).x(), p.vertex(i).y()});
  return arr;
}

ConvexPolygon polygon_from_json(const nlohmann::json& j) {
  std::vector<Vec2d> pts;
  for (const auto& p : j) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return ConvexPolygon(pts);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["dt"] = s.mpa.dt;
  j["horizon"] = s.mpa.horizon;
  j["margin"] = s.mpa.margin;
  j["level_limit"] = s.level_limit.str();
  j["constraint_mode"] = to_string(s.constraint_mode);
  j["seed"] = s.seed;
  const auto& p = s.mpa.params;
  j["params"] = {{"wheelbase", p.wheelbase},     {"body_length", p.body_length},
                 {"body_width", p.body_width},   {"max_speed", p.max_speed},
                 {"max_steering", p.max_steering}};
  j["speed_levels"] = s.mpa.speed_levels;
  j["steering_levels"] = s.mpa.steering_levels;
  nlohmann::json area = nlohmann::json::array();
  for (const auto& part : s.drivable_area.parts()) area.push_back(polygon_json(part));
  j["drivable_area"] = std::move(area);
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& path : s.paths) {
    nlohmann::json pts = nlohmann::json::array();
    auto points = path.points();
    if (path.closed()) points.pop_back();
    for (const auto& q : points) pts.push_back({q.x(), q.y()});
    paths.push_back({{"points", std::move(pts)},
                     {"closed", path.closed()},
                     {"speed_limit", path.speed_limit()}});
  }
  j["paths"] = std::move(paths);
  nlohmann::json vehicles = nlohmann::json::array();
  for (const auto& v : s.vehicles)
    vehicles.push_back({{"x", v.initial.x},
                        {"y", v.initial.y},
                        {"yaw", v.initial.yaw},
                        {"speed_index", v.initial_state.speed_index},
                        {"steering_index", v.initial_state.steering_index},
                        {"path", v.path}});
  j["vehicles"] = std::move(vehicles);
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    s.mpa.dt = j.value("dt", 0.2);
    s.mpa.horizon = j.value("horizon", 7);
    s.mpa.margin = j.value("margin", 0.01);
    if (j.contains("level_limit")) {
      const auto& l = j["level_limit"];
      s.level_limit = l.is_string() ? LevelLimit::parse(l.get<std::string>())
                                    : LevelLimit::finite(l.get<int>());
    }
    s.constraint_mode = parse_constraint_mode(j.value("constraint_mode", std::string("reach")));
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params")) {
      const auto& p = j["params"];
      auto& q = s.mpa.params;
      q.wheelbase = p.value("wheelbase", q.wheelbase);
      q.body_length = p.value("body_length", q.body_length);
      q.body_width = p.value("body_width", q.body_width);
      q.max_speed = p.value("max_speed", q.max_speed);
      q.max_steering = p.value("max_steering", q.max_steering);
    }
    if (j.contains("speed_levels")) s.mpa.speed_levels = j["speed_levels"].get<std::vector<double>>();
    if (j.contains("steering_levels"))
      s.mpa.steering_levels = j["steering_levels"].get<std::vector<double>>();
    for (const auto& part : j.value("drivable_area", nlohmann::json::array()))
      s.drivable_area.add(polygon_from_json(part));
    for (const auto& pj : j.at("paths")) {
      std::vector<Vec2d> pts;
      for (const auto& q : pj.at("points"))
        pts.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
      s.paths.emplace_back(std::move(pts), pj.value("closed", false),
                           pj.value("speed_limit", s.mpa.params.max_speed));
    }
    for (const auto& vj : j.at("vehicles")) {
      VehicleSpec v;
      v.initial_state = {vj.value("speed_index", 0), vj.value("steering_index", -1)};
      if (v.initial_state.steering_index < 0)
        v.initial_state.steering_index = static_cast<int>(s.mpa.steering_levels.size() / 2);
      v.initial.x = vj.at("x").get<double>();
      v.initial.y = vj.at("y").get<double>();
      v.initial.yaw = normalize_angle(vj.value("yaw", 0.0));
      const auto si = static_cast<std::size_t>(v.initial_state.speed_index);
      v.initial.speed = si < s.mpa.speed_levels.size() ? s.mpa.speed_levels[si] : -1.0;
      v.path = vj.value("path", 0);
      s.vehicles.push_back(v);
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ScenarioError("cannot parse " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

std::string scenario_hash(const Scenario& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json(s).dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

namespace {

// Road of width `width` around a polyline: one rectangle per segment and a
// regular octagon at every interior joint.
PolyUnion road_around(const std::vector<Vec2d>& pts, bool closed, double width) {
  PolyUnion road;
  const double hw = width / 2;
  std::vector<Vec2d> p = pts;
  if (closed) p.push_back(pts.front());
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const Vec2d d = (p[i + 1] - p[i]).normalized();
    const Vec2d n(-d.y(), d.x());
    road.add(ConvexPolygon(std::vector<Vec2d>{p[i] - hw * n, p[i + 1] - hw * n,
                                              p[i + 1] + hw * n, p[i] + hw * n}));
  }
  const std::size_t first = closed ? 0 : 1;
  const std::size_t last = closed ? pts.size() : pts.size() - 1;
  for (std::size_t i = first; i < last; ++i) {
    std::vector<Vec2d> oct;
    for (int k = 0; k < 8; ++k) {
      const double a = std::numbers::pi / 8 + k * std::numbers::pi / 4;
      oct.push_back(pts[i] + hw * Vec2d(std::cos(a), std::sin(a)));
    }
    road.add(ConvexPolygon(oct));
  }
  return road;
}

// Annulus sector [a0, a1] around `c` as one convex piece: outer arc sampled
// on the circle, inner arc replaced by its chord (a slight inward loss).
ConvexPolygon annulus_sector(const Vec2d& c, double r_in, double r_out, double a0, double a1) {
  std::vector<Vec2d> pts;
  pts.push_back(c + r_in * Vec2d(std::cos(a0), std::sin(a0)));
  const int samples = 6;
  for (int k = 0; k <= samples; ++k) {
    const double a = a0 + (a1 - a0) * k / samples;
    pts.push_back(c + r_out * Vec2d(std::cos(a), std::sin(a)));
  }
  pts.push_back(c + r_in * Vec2d(std::cos(a1), std::sin(a1)));
  return ConvexPolygon::hull(std::move(pts));
}

VehicleSpec vehicle_on(const Path& path, int path_id, double s, const Scenario& sc,
                       int speed_index = 0) {
  VehicleSpec v;
  const Vec2d p = path.point_at(s);
  v.initial = {p.x(), p.y(), path.heading_at(s), sc.mpa.speed_levels.at(speed_index)};
  v.initial_state = {speed_index, static_cast<int>(sc.mpa.steering_levels.size() / 2)};
  v.path = path_id;
  return v;
}

}  // namespace

Scenario single_vehicle_scenario() {
  Scenario s;
  s.name = "single";
  std::vector<Vec2d> pts{{0.0, 0.0}, {40.0, 0.0}};
  s.drivable_area = road_around(pts, false, 0.6);
  s.drivable_area.add(ConvexPolygon::box({-1.0, -0.3}, {0.0, 0.3}));
  s.paths.emplace_back(pts, false, s.mpa.params.max_speed);
  s.vehicles.push_back(vehicle_on(s.paths[0], 0, 0.5, s));
  return s;
}

Scenario intersection_scenario() {
  Scenario s;
  s.name = "intersection";
  s.level_limit = LevelLimit::finite(1);
  const double lane = 0.15;  // lane center offset from the road axis
  const double reach = 6.0;
  // Two crossing roads, two lanes each.
  s.drivable_area.add(ConvexPolygon::box({-reach, -0.35}, {reach, 0.35}));
  s.drivable_area.add(ConvexPolygon::box({-0.35, -reach}, {0.35, reach}));
  const double v = s.mpa.params.max_speed;
  s.paths.emplace_back(std::vector<Vec2d>{{-reach, -lane}, {reach, -lane}}, false, v);
  s.paths.emplace_back(std::vector<Vec2d>{{lane, -reach}, {lane, reach}}, false, v);
  s.paths.emplace_back(std::vector<Vec2d>{{reach, lane}, {-reach, lane}}, false, v);
  // Start distances from the path starts; vehicles approach at speed.
  s.vehicles.push_back(vehicle_on(s.paths[0], 0, reach - 1.6, s, 3));
  s.vehicles.push_back(vehicle_on(s.paths[1], 1, reach - 1.9, s, 3));
  s.vehicles.push_back(vehicle_on(s.paths[2], 2, reach - 2.0, s, 3));
  return s;
}

Scenario loop_scenario(int n, std::uint64_t seed) {
  if (n < 1) throw ScenarioError("loop scenario needs at least one vehicle");
  Scenario s;
  s.name = "loop";
  s.seed = seed;
  // Corner radius driven exactly by the second-smallest steering level.
  const double steer = s.mpa.steering_levels[s.mpa.steering_levels.size() / 2 + 1];
  const double radius = s.mpa.params.wheelbase / std::tan(steer);
  const double width = 12.0, height = 4.0;
  std::vector<Vec2d> pts;
  const double hx = width / 2 - radius, hy = height / 2 - radius;
  const Vec2d centers[4] = {{hx, -hy}, {hx, hy}, {-hx, hy}, {-hx, -hy}};
  const int arc_points = 10;
  for (int c = 0; c < 4; ++c) {
    const double a0 = -std::numbers::pi / 2 + c * std::numbers::pi / 2;
    for (int k = 0; k <= arc_points; ++k) {
      const double a = a0 + (std::numbers::pi / 2) * k / arc_points;
      pts.push_back(centers[c] + radius * Vec2d(std::cos(a), std::sin(a)));
    }
  }
  // Road: one rectangle per straight, three sectors per corner. Pieces
  // overlap slightly so containment never hinges on a shared seam.
  const double hw = 0.25, overlap = 0.01, sector_overlap = 0.01;
  s.drivable_area.add(ConvexPolygon::box({-hx - overlap, -height / 2 - hw},
                                         {hx + overlap, -height / 2 + hw}));
  s.drivable_area.add(ConvexPolygon::box({-hx - overlap, height / 2 - hw},
                                         {hx + overlap, height / 2 + hw}));
  s.drivable_area.add(ConvexPolygon::box({width / 2 - hw, -hy - overlap},
                                         {width / 2 + hw, hy + overlap}));
  s.drivable_area.add(ConvexPolygon::box({-width / 2 - hw, -hy - overlap},
                                         {-width / 2 + hw, hy + overlap}));
  for (int c = 0; c < 4; ++c) {
    const double a0 = -std::numbers::pi / 2 + c * std::numbers::pi / 2;
    for (int k = 0; k < 3; ++k) {
      const double lo = a0 + k * std::numbers::pi / 6 - sector_overlap;
      const double hi = a0 + (k + 1) * std::numbers::pi / 6 + sector_overlap;
      s.drivable_area.add(annulus_sector(centers[c], radius - hw, radius + hw, lo, hi));
    }
  }
  s.paths.emplace_back(pts, true, s.mpa.params.max_speed);
  const Path& path = s.paths[0];

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(0.25, 0.9);
  // Platoon leader first; followers behind it along the path.
  double arc = 0.5;
  for (int v = 0; v < n; ++v) {
    s.vehicles.push_back(vehicle_on(path, 0, arc, s));
    arc -= s.mpa.params.body_length + gap(rng);
  }
  if (-arc + 0.5 > path.length())
    throw ScenarioError("loop circuit too short for " + std::to_string(n) + " vehicles");
  return s;
}

Scenario random_scenario(int n, std::uint64_t seed) {
  Scenario s;
  s.name = "random";
  s.seed = seed;
  const double half = 4.0;
  s.drivable_area.add(ConvexPolygon::box({-half, -half}, {half, half}));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> offset(-0.8, 0.8);
  std::uniform_int_distribution<int> speed(0, 2);
  int attempts = 0;
  while (static_cast<int>(s.vehicles.size()) < n) {
    if (++attempts > 10000) throw ScenarioError("could not place random vehicles");
    const double a = angle(rng);
    const Vec2d start = 3.0 * Vec2d(std::cos(a), std::sin(a));
    const Vec2d through(offset(rng), offset(rng));
    const Vec2d dir = (through - start).normalized();
    const Vec2d end = start + 6.0 * dir;
    Path path({start, end}, false, s.mpa.params.max_speed);
    VehicleSpec v = vehicle_on(path, static_cast<int>(s.paths.size()), 0.0, s, speed(rng));
    const ConvexPolygon fp = footprint(v.initial, s.params());
    bool clear = true;
    for (const auto& other : s.vehicles)
      if (intersects(inflate(fp, 0.3), footprint(other.initial, s.params()))) clear = false;
    if (!clear) continue;
    s.paths.push_back(path);
    s.vehicles.push_back(v);
  }
  return s;
}

Scenario resolve_scenario(const std::string& name, std::uint64_t seed) {
  auto count_suffix = [&](const std::string& prefix, int fallback) {
    if (name.size() > prefix.size() + 1 && name.compare(0, prefix.size() + 1, prefix + ":") == 0)
      return std::stoi(name.substr(prefix.size() + 1));
    return fallback;
  };
  Scenario s;
  if (name == "single") {
    s = single_vehicle_scenario();
  } else if (name == "intersection") {
    s = intersection_scenario();
  } else if (name == "loop" || name.rfind("loop:", 0) == 0) {
    s = loop_scenario(count_suffix("loop", 20), seed);
  } else if (name == "random" || name.rfind("random:", 0) == 0) {
    s = random_scenario(count_suffix("random", 8), seed);
  } else {
    s = load_scenario(name);
    s.seed = seed;
  }
  validate(s);
  return s;
}

}  // namespace pdmpc
