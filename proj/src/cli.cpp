#include "pdmpc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

namespace pdmpc {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::uint64_t parse_u64(const std::string& t) {
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("invalid seed '" + t + "'");
  return std::stoull(t);
}

// The automaton and its reach table only depend on the automaton settings,
// so every seed of a command shares them.
class ModelCache {
 public:
  explicit ModelCache(fs::path cache_dir) : dir_(std::move(cache_dir)) {}

  struct Model {
    Mpa mpa;
    ReachTable table;
  };

  const Model& get(const MpaConfig& config) {
    const std::string key = reach_table_key(config, {});
    auto it = models_.find(key);
    if (it != models_.end()) return *it->second;
    auto m = std::make_unique<Model>();
    m->mpa = build_mpa(config);
    m->table = dir_.empty() ? build_reach_table(m->mpa) : load_or_build_reach_table(m->mpa, dir_);
    return *models_.emplace(key, std::move(m)).first->second;
  }

 private:
  fs::path dir_;
  std::map<std::string, std::unique_ptr<Model>> models_;
};

MetricsRow row_of(std::uint64_t seed, const Scenario& s, const RunMetrics& m) {
  return {seed, s.level_limit.str(), m.normalized_avg_speed, m.max_levels_observed,
          m.collision_count};
}

std::string jsonl(const std::vector<StepRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

ModeSummary summarize(ConstraintMode mode, const std::vector<StepRecord>& log,
                      const RunMetrics& m) {
  ModeSummary s;
  s.mode = mode;
  s.collisions = m.collision_count;
  for (const auto& r : log) {
    if (r.infeasible_count() > 0) ++s.infeasible_steps;
    if (!r.collisions.empty() && !s.first_collision_step) s.first_collision_step = r.step;
    s.predicted_intersection.push_back(!r.predicted_conflicts.empty());
    std::vector<Vec2d> pos;
    for (const auto& v : r.vehicles) pos.push_back(v.state.position());
    s.positions.push_back(std::move(pos));
  }
  return s;
}

nlohmann::json to_json(const ModeSummary& s) {
  nlohmann::json flags = nlohmann::json::array();
  for (bool b : s.predicted_intersection) flags.push_back(b);
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& step : s.positions) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& p : step) row.push_back({p.x(), p.y()});
    pos.push_back(std::move(row));
  }
  return {{"mode", to_string(s.mode)},
          {"collisions", s.collisions},
          {"infeasible_steps", s.infeasible_steps},
          {"first_collision_step",
           s.first_collision_step ? nlohmann::json(*s.first_collision_step) : nlohmann::json()},
          {"predicted_intersection", std::move(flags)},
          {"positions", std::move(pos)}};
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(parse_u64(item));
      continue;
    }
    const std::uint64_t a = parse_u64(item.substr(0, dash));
    const std::uint64_t b = parse_u64(item.substr(dash + 1));
    if (b < a) throw ConfigError("empty seed range '" + item + "'");
    for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

Scenario make_scenario(const RunConfig& config, std::uint64_t seed) {
  std::string name = config.scenario;
  if (config.vehicles) {
    if (name != "loop" && name != "random")
      throw ConfigError("--vehicles only applies to the loop and random scenarios");
    name += ":" + std::to_string(*config.vehicles);
  }
  Scenario s = resolve_scenario(name, seed);
  if (config.dt) s.mpa.dt = *config.dt;
  if (config.horizon) s.mpa.horizon = *config.horizon;
  if (config.margin) s.mpa.margin = *config.margin;
  if (config.level_limit) s.level_limit = *config.level_limit;
  if (config.mode) s.constraint_mode = *config.mode;
  if (s.mpa.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(s.mpa.dt > 0)) throw ConfigError("dt must be positive");
  validate(s);
  return s;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "seed,level_limit,normalized_avg_speed,max_levels,collisions\n";
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + ',' + r.level_limit + ',' + fixed6(r.normalized_avg_speed) +
           ',' + std::to_string(r.max_levels) + ',' + std::to_string(r.collisions) + '\n';
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path cmd_build_mpa(const RunConfig& config, std::ostream& log) {
  if (config.cache_dir.empty()) throw ConfigError("build-mpa needs a cache directory");
  const Scenario s = make_scenario(config, config.seeds.front());
  const Mpa mpa = build_mpa(s.mpa);
  bool rebuilt = false;
  const ReachTable table = load_or_build_reach_table(mpa, config.cache_dir, {}, &rebuilt);
  const fs::path file = config.cache_dir / ("reach_" + table.key() + ".cbor");

  log << (rebuilt ? "built " : "loaded ") << file.string() << '\n';
  log << "states " << mpa.state_count() << ", primitives " << mpa.primitives().size()
      << ", horizon " << table.horizon() << '\n';
  log << "speed steering parts per step\n";
  for (int i = 0; i < mpa.state_count(); ++i) {
    const MpaState st = mpa.state(i);
    log << st.speed_index << ' ' << st.steering_index;
    for (int h = 0; h < table.horizon(); ++h) log << ' ' << table.entry(st, h).size();
    log << '\n';
  }
  return file;
}

std::vector<MetricsRow> cmd_run(const RunConfig& config, std::ostream& log) {
  ModelCache models(config.cache_dir);
  std::vector<MetricsRow> rows;
  nlohmann::json all = nlohmann::json::array();
  for (std::uint64_t seed : config.seeds) {
    const Scenario s = make_scenario(config, seed);
    const auto& m = models.get(s.mpa);
    const RunResult r = run(s, config.steps, m.mpa, m.table, {}, config.cache_dir);
    rows.push_back(row_of(seed, s, r.metrics));
    nlohmann::json j = to_json(r.metrics);
    j["seed"] = seed;
    j["scenario"] = s.name;
    j["level_limit"] = s.level_limit.str();
    j["mode"] = to_string(s.constraint_mode);
    all.push_back(std::move(j));
    write_file_atomic(config.out / ("run_" + std::to_string(seed) + ".jsonl"), jsonl(r.log));
    log << "seed " << seed << ": normalized speed " << fixed6(r.metrics.normalized_avg_speed)
        << ", max levels " << r.metrics.max_levels_observed << ", collisions "
        << r.metrics.collision_count << '\n';
  }
  write_file_atomic(config.out / "metrics.json", all.dump(2) + '\n');
  write_file_atomic(config.out / "metrics.csv", metrics_csv(rows));
  return rows;
}

nlohmann::json to_json(const CompareReport& r) {
  return {{"seed", r.seed}, {"prev", to_json(r.previous)}, {"reach", to_json(r.reach)}};
}

std::vector<CompareReport> cmd_compare_constraints(const RunConfig& config, std::ostream& log) {
  if (config.level_limit && *config.level_limit != LevelLimit::finite(1))
    throw ConfigError("compare-constraints runs at level limit 1");
  ModelCache models(config.cache_dir);
  std::vector<CompareReport> reports;
  std::string csv = "seed,mode,collisions,infeasible_steps,first_collision_step,predicted_steps\n";
  for (std::uint64_t seed : config.seeds) {
    CompareReport rep;
    rep.seed = seed;
    for (ConstraintMode mode : {ConstraintMode::PreviousTrajectory, ConstraintMode::ReachableSets}) {
      RunConfig c = config;
      c.mode = mode;
      c.level_limit = LevelLimit::finite(1);
      const Scenario s = make_scenario(c, seed);
      const auto& m = models.get(s.mpa);
      const RunResult r = run(s, config.steps, m.mpa, m.table, {}, config.cache_dir);
      ModeSummary sum = summarize(mode, r.log, r.metrics);
      const auto predicted =
          std::count(sum.predicted_intersection.begin(), sum.predicted_intersection.end(), true);
      csv += std::to_string(seed) + ',' + to_string(mode) + ',' + std::to_string(sum.collisions) +
             ',' + std::to_string(sum.infeasible_steps) + ',' +
             (sum.first_collision_step ? std::to_string(*sum.first_collision_step) : "") + ',' +
             std::to_string(predicted) + '\n';
      log << "seed " << seed << ' ' << to_string(mode) << ": collisions " << sum.collisions
          << ", infeasible steps " << sum.infeasible_steps << '\n';
      (mode == ConstraintMode::ReachableSets ? rep.reach : rep.previous) = std::move(sum);
    }
    reports.push_back(std::move(rep));
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(to_json(r));
  write_file_atomic(config.out / "compare.json", j.dump(2) + '\n');
  write_file_atomic(config.out / "compare.csv", csv);
  return reports;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "level_limit,runs,speed_q1,speed_median,speed_q3,levels_q1,levels_median,levels_q3,"
      "collisions_q1,collisions_median,collisions_q3,collisions_total\n";
  for (const auto& r : rows) {
    out += r.limit.str() + ',' + std::to_string(r.runs);
    for (const Quartiles* q : {&r.speed, &r.levels, &r.collisions})
      out += ',' + fixed6(q->q1) + ',' + fixed6(q->median) + ',' + fixed6(q->q3);
    out += ',' + std::to_string(r.collisions_total) + '\n';
  }
  return out;
}

SweepResult cmd_sweep_levels(const RunConfig& config, std::ostream& log,
                             std::vector<LevelLimit> limits) {
  if (limits.empty()) {
    for (int l = 1; l <= 5; ++l) limits.push_back(LevelLimit::finite(l));
    limits.push_back(LevelLimit::unbounded());
  }
  ModelCache models(config.cache_dir);
  SweepResult result;
  for (const LevelLimit& limit : limits) {
    SweepRow row;
    row.limit = limit;
    std::vector<double> speed, levels, collisions;
    for (std::uint64_t seed : config.seeds) {
      RunConfig c = config;
      c.level_limit = limit;
      const Scenario s = make_scenario(c, seed);
      const auto& m = models.get(s.mpa);
      const RunResult r = run(s, config.steps, m.mpa, m.table, {}, config.cache_dir);
      result.runs.push_back(row_of(seed, s, r.metrics));
      speed.push_back(r.metrics.normalized_avg_speed);
      levels.push_back(r.metrics.max_levels_observed);
      collisions.push_back(r.metrics.collision_count);
      row.collisions_total += r.metrics.collision_count;
      if (limit.is_unbounded()) {
        for (std::size_t k = 0; k < r.metrics.levels_per_step.size(); ++k)
          if (r.metrics.levels_per_step[k] != r.metrics.unpartitioned_levels_per_step[k])
            ++row.level_mismatches;
      }
      ++row.runs;
      log << "limit " << limit.str() << " seed " << seed << ": normalized speed "
          << fixed6(r.metrics.normalized_avg_speed) << ", max levels "
          << r.metrics.max_levels_observed << ", collisions " << r.metrics.collision_count
          << '\n';
    }
    row.speed = quartiles(speed);
    row.levels = quartiles(levels);
    row.collisions = quartiles(collisions);
    result.summary.push_back(row);
  }
  write_file_atomic(config.out / "sweep_runs.csv", metrics_csv(result.runs));
  write_file_atomic(config.out / "sweep_summary.csv", sweep_summary_csv(result.summary));
  return result;
}

}  // namespace pdmpc
