#include "pdmpc/mpa.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace pdmpc {

int Mpa::index(const MpaState& s) const {
  if (!valid(s))
    throw std::out_of_range("MPA state (" + std::to_string(s.speed_index) + ", " +
                            std::to_string(s.steering_index) + ") out of range");
  return s.speed_index * steering_level_count() + s.steering_index;
}

std::optional<int> Mpa::find_primitive(const MpaState& from, const MpaState& to) const {
  for (int id : outgoing(from))
    if (primitives_[id].to == to) return id;
  return std::nullopt;
}

MpaState Mpa::brake_target(const MpaState& s) const {
  MpaState t = s;
  if (t.speed_index > 0) --t.speed_index;
  if (t.steering_index < straight_index_) ++t.steering_index;
  if (t.steering_index > straight_index_) --t.steering_index;
  return t;
}

namespace {

void validate_config(const MpaConfig& c) {
  c.params.validate();
  if (!(c.dt > 0)) throw std::invalid_argument("dt must be positive");
  if (c.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(c.margin >= 0)) throw std::invalid_argument("margin must be non-negative");
  if (c.samples < 1 || c.substeps_per_sample < 1 || c.sweep_parts < 1 ||
      c.sweep_parts > c.samples)
    throw std::invalid_argument("invalid primitive sampling settings");

  const auto& v = c.speed_levels;
  if (v.empty()) throw std::invalid_argument("need at least one speed level");
  if (v.front() != 0.0) throw std::invalid_argument("lowest speed level must be 0");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw std::invalid_argument("speed levels must ascend");
  if (v.back() > c.params.max_speed + 1e-12)
    throw std::invalid_argument("speed level exceeds max_speed");

  const auto& s = c.steering_levels;
  if (s.size() % 2 == 0)
    throw std::invalid_argument("steering levels must be symmetric and contain 0");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0 && !(s[i] > s[i - 1]))
      throw std::invalid_argument("steering levels must ascend");
    if (std::abs(s[i] + s[s.size() - 1 - i]) > 1e-12)
      throw std::invalid_argument("steering levels must be symmetric about 0");
    if (std::abs(s[i]) > c.params.max_steering + 1e-12)
      throw std::invalid_argument("steering level exceeds max_steering");
  }
}

MotionPrimitive make_primitive(const MpaConfig& c, int id, const MpaState& from,
                               const MpaState& to) {
  MotionPrimitive m;
  m.id = id;
  m.from = from;
  m.to = to;
  const VehicleState start{0, 0, 0, c.speed_levels[from.speed_index]};
  const VehicleInput input{c.steering_levels[to.steering_index],
                           c.speed_levels[to.speed_index]};
  m.samples.push_back(start);
  for (const auto& s :
       integrate_samples(start, input, c.params, c.dt, c.samples, c.substeps_per_sample))
    m.samples.push_back(s);
  m.end_pose = m.samples.back().pose();

  // Consecutive windows of samples sharing their boundary sample.
  const int n = static_cast<int>(m.samples.size()) - 1;
  for (int part = 0; part < c.sweep_parts; ++part) {
    const int lo = part * n / c.sweep_parts;
    const int hi = (part + 1) * n / c.sweep_parts;
    std::vector<Vec2d> pts;
    for (int i = lo; i <= hi; ++i) {
      const ConvexPolygon fp = footprint(m.samples[i], c.params);
      for (Eigen::Index k = 0; k < fp.size(); ++k) pts.push_back(fp.vertex(k));
    }
    m.raw_sweep.add(ConvexPolygon::hull(std::move(pts)));
  }
  m.sweep = inflate(m.raw_sweep, c.margin);
  for (const auto& part : m.sweep.parts())
    m.sweep_radius = std::max(m.sweep_radius, part.vertices().colwise().norm().maxCoeff());
  return m;
}

}  // namespace

Mpa build_mpa(const MpaConfig& config) {
  validate_config(config);
  Mpa mpa;
  mpa.config_ = config;
  const auto& s = config.steering_levels;
  mpa.straight_index_ = static_cast<int>(s.size() / 2);

  const int nv = mpa.speed_level_count();
  const int ns = mpa.steering_level_count();
  mpa.outgoing_.resize(static_cast<std::size_t>(nv * ns));
  for (int from_idx = 0; from_idx < nv * ns; ++from_idx) {
    const MpaState from = mpa.state(from_idx);
    for (int to_idx = 0; to_idx < nv * ns; ++to_idx) {
      const MpaState to = mpa.state(to_idx);
      if (std::abs(to.speed_index - from.speed_index) > 1 ||
          std::abs(to.steering_index - from.steering_index) > 1)
        continue;
      const int id = static_cast<int>(mpa.primitives_.size());
      mpa.primitives_.push_back(make_primitive(config, id, from, to));
      mpa.outgoing_[from_idx].push_back(id);
    }
  }
  return mpa;
}

// ---------------------------------------------------------------------------
// Reach table

const PolyUnion& ReachTable::entry(const MpaState& s, int h) const {
  if (h < 0 || h >= horizon_) throw std::out_of_range("reach table step out of range");
  if (s.speed_index < 0 || s.steering_index < 0 || s.steering_index >= steering_levels_)
    throw std::out_of_range("unknown MPA state");
  const auto idx = static_cast<std::size_t>(s.speed_index * steering_levels_ + s.steering_index);
  if (idx >= per_state_.size()) throw std::out_of_range("unknown MPA state");
  return per_state_[idx][static_cast<std::size_t>(h)];
}

PolyUnion reachable_set(const ReachTable& table, const MpaState& state, const Pose& pose,
                        int h) {
  return apply_transform(table.entry(state, h), pose);
}

namespace {

// Support function of one sweep part on a fine grid of local directions,
// plus its vertex mean (used to pick a cluster). Sample j = m * kSub + r is
// stored at h[r][m] so that the samples read for one placement (fixed r,
// every m) are contiguous.
struct PartSupport {
  static constexpr int kCoarse = 24;
  static constexpr int kSub = 64;
  static constexpr int kSamples = kCoarse * kSub;
  Vec2d center;
  std::array<std::array<double, kCoarse>, kSub> h;

  explicit PartSupport(const ConvexPolygon& p) : center(p.vertices().rowwise().mean()) {
    for (int j = 0; j < kSamples; ++j) {
      const double a = 2 * std::numbers::pi * j / kSamples;
      h[j % kSub][j / kSub] =
          (Eigen::RowVector2d(std::cos(a), std::sin(a)) * p.vertices()).maxCoeff();
    }
  }
  double at(int j) const {
    j %= kSamples;
    return h[j % kSub][j / kSub];
  }
};

// Collects the occupancies of one table entry. Small entries are stored
// exactly; larger ones are replaced, per polar cluster around the start pose,
// by the polygon bounded by the cluster's support values in kDirections
// fixed directions (a superset of the cluster's convex hull).
class OccupancyAccumulator {
 public:
  static constexpr int kDirections = PartSupport::kCoarse;

  explicit OccupancyAccumulator(const ReachTableOptions& o) : options_(o) {
    for (int k = 0; k < kDirections; ++k) {
      const double a = 2 * std::numbers::pi * k / kDirections;
      dirs_[k] = Vec2d(std::cos(a), std::sin(a));
    }
  }

  // Adds `part` placed at `pose` and grown by `slack` in every direction.
  void add(const ConvexPolygon& part, const PartSupport& support, const Pose& pose,
           double slack) {
    if (!clustered_) {
      const ConvexPolygon placed = apply_transform(part, pose);
      ConvexPolygon q = slack > 0 ? inflate(placed, slack) : placed;
      for (const auto& e : exact_)
        if (e == q) return;
      exact_.push_back(std::move(q));
      if (exact_.size() > options_.exact_part_limit) {
        clustered_ = true;
        for (const auto& e : exact_) add_vertices(e.vertices());
        exact_.clear();
      }
      return;
    }
    const Rotation& rot = rotation_for(pose.yaw());
    Support& s = cluster_of(pose.apply(support.center));
    const Vec2d& t = pose.translation();
    const double grow = slack + kGuard;
    for (int k = 0; k < kDirections; ++k) {
      const int j = rot.j0 + k * PartSupport::kSub;
      const double local = rot.w1 * support.at(j) + rot.w2 * support.at(j + 1);
      s[k] = std::max(s[k], local + dirs_[k].dot(t) + grow);
    }
  }

  PolyUnion finish() {
    if (!clustered_) return PolyUnion(std::move(exact_));
    PolyUnion out;
    for (const auto& [key, support] : clusters_) {
      // Axis directions sit at k = 0, K/4, K/2, 3K/4.
      const int q = kDirections / 4;
      std::vector<Vec2d> poly{{-support[2 * q], -support[3 * q]},
                              {support[0], -support[3 * q]},
                              {support[0], support[q]},
                              {-support[2 * q], support[q]}};
      for (int k = 0; k < kDirections; ++k)
        if (k % q != 0) poly = detail::clip_halfplane<double>(poly, dirs_[k], support[k]);
      out.add(ConvexPolygon::hull(std::move(poly)));
    }
    return out;
  }

 private:
  using Support = std::array<double, kDirections>;

  // World direction k is local direction (angle_k - yaw). Between two grid
  // samples u1, u2 the direction is u = w1 u1 + w2 u2 with w1, w2 >= 0, so
  // w1 h(u1) + w2 h(u2) bounds the support from above.
  struct Rotation {
    double yaw = std::numeric_limits<double>::quiet_NaN();
    int j0 = 0;
    double w1 = 0, w2 = 0;
  };

  const Rotation& rotation_for(double yaw) {
    if (yaw == rotation_.yaw) return rotation_;
    constexpr double step = 2 * std::numbers::pi / PartSupport::kSamples;
    double phi = std::fmod(-yaw, 2 * std::numbers::pi);
    if (phi < 0) phi += 2 * std::numbers::pi;
    int j0 = static_cast<int>(phi / step);
    const double alpha = std::clamp(phi - j0 * step, 0.0, step);
    rotation_ = {yaw, j0 % PartSupport::kSamples, std::sin(step - alpha) / std::sin(step),
                 std::sin(alpha) / std::sin(step)};
    return rotation_;
  }

  // Rounding guard keeps the bounded polygon a true superset.
  static constexpr double kGuard = 1e-9;

  Support& cluster_of(const Vec2d& c) {
    const double angle = std::atan2(c.y(), c.x()) + std::numbers::pi;
    int a = static_cast<int>(angle / (2 * std::numbers::pi) * options_.angular_bins);
    a = std::clamp(a, 0, options_.angular_bins - 1);
    const int r = static_cast<int>(c.norm() / options_.radial_bin);
    auto [it, inserted] = clusters_.try_emplace({r, a});
    if (inserted) it->second.fill(-std::numeric_limits<double>::infinity());
    return it->second;
  }

  void add_vertices(const Eigen::Matrix2Xd& v) {
    Support& s = cluster_of(v.rowwise().mean());
    for (int k = 0; k < kDirections; ++k)
      s[k] = std::max(s[k], (dirs_[k].transpose() * v).maxCoeff() + kGuard);
  }

  const ReachTableOptions& options_;
  std::array<Vec2d, kDirections> dirs_;
  bool clustered_ = false;
  Rotation rotation_;
  std::vector<ConvexPolygon> exact_;
  std::map<std::pair<int, int>, Support> clusters_;
};

// A frontier pose plus a bound on how far the true poses it stands for may
// deviate (position in m, yaw in rad) after deduplication merges.
struct FrontierNode {
  int state = 0;
  Pose pose;
  double position_error = 0;
  double yaw_error = 0;
};

struct GridKey {
  int state;
  long long x, y, yaw;
  bool operator==(const GridKey&) const = default;
};

struct GridKeyHash {
  std::size_t operator()(const GridKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.state);
    for (long long v : {k.x, k.y, k.yaw})
      h = h * 1000003u ^ std::hash<long long>{}(v);
    return h;
  }
};

std::vector<PolyUnion> reach_entries_for(
    const Mpa& mpa, int start, const std::vector<std::vector<PartSupport>>& supports,
    const ReachTableOptions& options) {
  const int horizon = mpa.horizon();
  std::vector<PolyUnion> entries;
  std::vector<FrontierNode> frontier{{start, Pose::identity(), 0, 0}};

  for (int h = 0; h < horizon; ++h) {
    OccupancyAccumulator acc(options);
    std::vector<FrontierNode> next;
    std::unordered_map<GridKey, std::size_t, GridKeyHash> seen;
    const bool expand = h + 1 < horizon;

    for (const FrontierNode& node : frontier) {
      for (int id : mpa.outgoing(mpa.state(node.state))) {
        const MotionPrimitive& m = mpa.primitive(id);
        const double slack = node.position_error + node.yaw_error * m.sweep_radius;
        for (std::size_t k = 0; k < m.sweep.size(); ++k)
          acc.add(m.sweep.parts()[k], supports[id][k], node.pose, slack);
        if (!expand) continue;

        FrontierNode succ;
        succ.state = mpa.index(m.to);
        succ.pose = node.pose * m.end_pose;
        succ.position_error =
            node.position_error + node.yaw_error * m.end_pose.translation().norm();
        succ.yaw_error = node.yaw_error;

        const GridKey key{
            succ.state,
            std::llround(succ.pose.x() / options.position_resolution),
            std::llround(succ.pose.y() / options.position_resolution),
            std::llround(succ.pose.yaw() / options.yaw_resolution)};
        auto [it, inserted] = seen.try_emplace(key, next.size());
        if (inserted) {
          next.push_back(succ);
          continue;
        }
        FrontierNode& rep = next[it->second];
        const double dp = (succ.pose.translation() - rep.pose.translation()).norm();
        const double dyaw = std::abs(normalize_angle(succ.pose.yaw() - rep.pose.yaw()));
        rep.position_error = std::max(rep.position_error, dp + succ.position_error);
        rep.yaw_error = std::max(rep.yaw_error, dyaw + succ.yaw_error);
      }
    }
    entries.push_back(acc.finish());
    frontier = std::move(next);
  }
  return entries;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ReachTable build_reach_table(const Mpa& mpa, const ReachTableOptions& options) {
  std::vector<std::vector<PolyUnion>> per_state;
  per_state.reserve(static_cast<std::size_t>(mpa.state_count()));
  std::vector<std::vector<PartSupport>> supports;
  for (const auto& m : mpa.primitives()) {
    supports.emplace_back();
    for (const auto& part : m.sweep.parts()) supports.back().emplace_back(part);
  }
  for (int s = 0; s < mpa.state_count(); ++s)
    per_state.push_back(reach_entries_for(mpa, s, supports, options));
  return ReachTable(mpa.horizon(), mpa.steering_level_count(), std::move(per_state),
                    reach_table_key(mpa.config(), options));
}

// ---------------------------------------------------------------------------
// Cache

namespace {

constexpr const char* kCacheFormat = "pdmpc-reach-table";
constexpr int kCacheVersion = 2;

}  // namespace

std::string reach_table_key(const MpaConfig& c, const ReachTableOptions& o) {
  std::ostringstream s;
  s << "v" << kCacheVersion << ";speeds";
  for (double v : c.speed_levels) s << ',' << fmt_double(v);
  s << ";steer";
  for (double v : c.steering_levels) s << ',' << fmt_double(v);
  s << ";params," << fmt_double(c.params.wheelbase) << ',' << fmt_double(c.params.body_length)
    << ',' << fmt_double(c.params.body_width) << ',' << fmt_double(c.params.max_speed) << ','
    << fmt_double(c.params.max_steering);
  s << ";dt," << fmt_double(c.dt) << ";margin," << fmt_double(c.margin) << ";horizon,"
    << c.horizon << ";sampling," << c.samples << ',' << c.substeps_per_sample << ','
    << c.sweep_parts;
  s << ";table," << fmt_double(o.position_resolution) << ',' << fmt_double(o.yaw_resolution)
    << ',' << o.exact_part_limit << ',' << o.angular_bins << ',' << fmt_double(o.radial_bin);

  // FNV-1a, 64 bit.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_reach_table(const ReachTable& table, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = kCacheFormat;
  j["version"] = kCacheVersion;
  j["key"] = table.key();
  j["horizon"] = table.horizon();
  j["steering_levels"] = table.steering_level_count();
  const auto& entries = table.entries();
  nlohmann::json states = nlohmann::json::array();
  for (const auto& per_h : entries) {
    nlohmann::json hs = nlohmann::json::array();
    for (const auto& u : per_h) {
      nlohmann::json parts = nlohmann::json::array();
      for (const auto& p : u.parts()) {
        std::vector<double> flat(p.vertices().data(),
                                 p.vertices().data() + p.vertices().size());
        parts.push_back(std::move(flat));
      }
      hs.push_back(std::move(parts));
    }
    states.push_back(std::move(hs));
  }
  j["entries"] = std::move(states);

  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    const auto bytes = nlohmann::json::to_cbor(j);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::optional<ReachTable> load_reach_table(const std::filesystem::path& path,
                                           const std::string& expected_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const nlohmann::json j = nlohmann::json::from_cbor(in);
    if (j.at("format") != kCacheFormat || j.at("version") != kCacheVersion ||
        j.at("key") != expected_key)
      return std::nullopt;
    const int horizon = j.at("horizon");
    const int steering_levels = j.at("steering_levels");
    std::vector<std::vector<PolyUnion>> per_state;
    for (const auto& hs : j.at("entries")) {
      std::vector<PolyUnion> row;
      for (const auto& parts : hs) {
        PolyUnion u;
        for (const auto& flat_json : parts) {
          const auto flat = flat_json.get<std::vector<double>>();
          Points2<double> v =
              Eigen::Map<const Points2<double>>(flat.data(), 2, static_cast<Eigen::Index>(flat.size() / 2));
          u.add(ConvexPolygon::from_trusted(std::move(v)));
        }
        row.push_back(std::move(u));
      }
      if (static_cast<int>(row.size()) != horizon) return std::nullopt;
      per_state.push_back(std::move(row));
    }
    return ReachTable(horizon, steering_levels, std::move(per_state), expected_key);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("PDMPC_CACHE_DIR"); env && *env) return env;
  return ".pdmpc-cache";
}

ReachTable load_or_build_reach_table(const Mpa& mpa, const std::filesystem::path& cache_dir,
                                     const ReachTableOptions& options, bool* rebuilt) {
  const std::string key = reach_table_key(mpa.config(), options);
  const auto path = cache_dir / ("reach_" + key + ".cbor");
  if (auto t = load_reach_table(path, key)) {
    if (rebuilt) *rebuilt = false;
    return *std::move(t);
  }
  ReachTable table = build_reach_table(mpa, options);
  save_reach_table(table, path);
  if (rebuilt) *rebuilt = true;
  return table;
}

}  // namespace pdmpc
