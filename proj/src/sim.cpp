#include "lswarm/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "lswarm/errors.hpp"

namespace lswarm {

namespace {

// Counter-based stream: the same key always yields the same numbers, no
// matter which thread asks.
struct SplitMix64 {
  using result_type = std::uint64_t;
  std::uint64_t s;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  SplitMix64 g{a ^ (b * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL)};
  return g();
}

Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError("expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) {
    throw ParseError("cannot open " + p.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  const std::filesystem::path p(rel);
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::vector<std::vector<Vec3>> scenario_paths(const Scenario& sc) {
  if (!sc.agents.paths.empty()) {
    return sc.agents.paths;
  }
  PlanConfig pc = sc.agents.plan;
  pc.agents = sc.agents.count;
  pc.agent_radius = sc.agents.radius;
  std::vector<std::vector<Vec3>> out;
  for (WaypointPath& w : plan(sc.model, sc.agents.camera, pc)) {
    out.push_back(std::move(w.waypoints));
  }
  if (out.size() != static_cast<std::size_t>(sc.agents.count)) {
    throw ValidationError("planner produced " + std::to_string(out.size()) + " paths for " +
                          std::to_string(sc.agents.count) + " agents");
  }
  return out;
}

AgentConfig agent_config(const Scenario& sc) {
  AgentConfig c;
  c.mode = sc.mode;
  c.tau = sc.tau;
  c.tau_static = sc.tau;
  c.dt = sc.dt;
  c.cruise = sc.agents.cruise;
  c.static_range = std::max(10.0, sc.sense_radius);
  c.avoid_margin = sc.avoid_margin;
  c.kalman.pos_std = std::max(sc.noise.position_std, 1e-3);
  c.kalman.vel_std = std::max(sc.noise.velocity_std, 1e-3);
  c.select.tau = sc.tau;
  return c;
}

std::vector<EntitySnapshot> snapshot(const WorldState& s) {
  std::vector<EntitySnapshot> w;
  w.reserve(s.agents.size() + s.obstacles.size());
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AgentKinematics& k = s.agents[i].kin;
    w.push_back({static_cast<std::uint32_t>(i), EntityKind::Agent, k.position, k.velocity, k.radius, true});
  }
  for (std::size_t j = 0; j < s.obstacles.size(); ++j) {
    const DynamicObstacle& o = s.obstacles[j];
    if (!o.alive(s.t)) continue;
    w.push_back({static_cast<std::uint32_t>(s.agents.size() + j), EntityKind::Obstacle, o.position_at(s.t),
                 o.velocity, o.radius, !o.non_reactive});
  }
  return w;
}

std::vector<Vec3> positions(std::span<const EntitySnapshot> w) {
  std::vector<Vec3> p;
  p.reserve(w.size());
  for (const EntitySnapshot& e : w) p.push_back(e.position);
  return p;
}

void append_row(std::string& out, double t, const EntitySnapshot& e, double side, bool res_ok) {
  char buf[256];
  const int n = std::snprintf(buf, sizeof buf, "%.3f,%u,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", t, e.id,
                              e.kind == EntityKind::Agent ? "agent" : "obstacle", e.position.x, e.position.y,
                              e.position.z, e.velocity.x, e.velocity.y, e.velocity.z, side, res_ok ? 1 : 0);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

AvoidMode parse_mode(const std::string& s) {
  if (s == "orca") return AvoidMode::Orca;
  if (s == "lswarm") return AvoidMode::LSwarm;
  throw ValidationError("unknown mode '" + s + "' (orca or lswarm)");
}

const char* mode_name(AvoidMode m) { return m == AvoidMode::Orca ? "orca" : "lswarm"; }

void Scenario::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
  };
  need(dt > 0.0, "dt must be positive");
  need(dt <= tau, "dt must not exceed tau");
  need(duration > 0.0, "duration must be positive");
  need(agents.count >= 1, "at least one agent is required");
  need(agents.radius > 0.0, "agent radius must be positive");
  need(agents.cruise > 0.0, "cruise speed must be positive");
  need(agents.max_speed >= agents.cruise, "max_speed must be at least the cruise speed");
  need(agents.max_accel > 0.0, "max_accel must be positive");
  need(agents.paths.empty() || agents.paths.size() == static_cast<std::size_t>(agents.count),
       "one path per agent is required");
  need(obstacles.count >= 0, "obstacle count must not be negative");
  need(obstacles.speed > 0.0 && obstacles.radius > 0.0 && obstacles.standoff > 0.0,
       "obstacle speed, radius and standoff must be positive");
  need(obstacles.aim_std >= 0.0, "aim_std must not be negative");
  need(noise.position_std >= 0.0 && noise.velocity_std >= 0.0, "noise must not be negative");
  need(sense_radius > 0.0, "sense_radius must be positive");
  need(max_neighbors >= 1, "max_neighbors must be at least 1");
  need(avoid_margin >= 0.0, "avoid_margin must not be negative");
  agents.camera.validate();
  for (std::size_t i = 0; i < agents.paths.size(); ++i) {
    static_cast<void>(PathProgress(agents.paths[i]));
  }
}

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  Scenario sc;
  try {
    sc.id = j.value("id", sc.id);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      sc.model = m.is_string() ? load_model(resolve(base, m.get<std::string>())) : model_from_json(m);
    } else {
      throw ParseError("scenario needs a model");
    }
    if (j.contains("agents")) {
      const auto& a = j.at("agents");
      sc.agents.count = a.value("count", sc.agents.count);
      sc.agents.radius = a.value("radius", sc.agents.radius);
      sc.agents.cruise = a.value("cruise", sc.agents.cruise);
      sc.agents.max_speed = a.value("max_speed", sc.agents.max_speed);
      sc.agents.max_accel = a.value("max_accel", sc.agents.max_accel);
      if (a.contains("camera")) {
        const auto& c = a.at("camera");
        sc.agents.camera = camera_from_json(c.is_string() ? load_json(resolve(base, c.get<std::string>())) : c);
      }
      if (a.contains("paths")) {
        for (const auto& p : a.at("paths")) {
          std::vector<Vec3> wps;
          for (const auto& w : p) wps.push_back(vec_from_json(w));
          sc.agents.paths.push_back(std::move(wps));
        }
      }
      if (a.contains("plan")) {
        const auto& p = a.at("plan");
        sc.agents.plan.clearance = p.value("clearance", sc.agents.plan.clearance);
        sc.agents.plan.row_factor = p.value("row_factor", sc.agents.plan.row_factor);
        sc.agents.plan.margin = p.value("margin", sc.agents.plan.margin);
      }
    }
    if (j.contains("obstacles")) {
      const auto& o = j.at("obstacles");
      sc.obstacles.count = o.value("count", sc.obstacles.count);
      sc.obstacles.pattern = o.value("pattern", sc.obstacles.pattern);
      sc.obstacles.speed = o.value("speed", sc.obstacles.speed);
      sc.obstacles.radius = o.value("radius", sc.obstacles.radius);
      sc.obstacles.non_reactive = o.value("non_reactive", sc.obstacles.non_reactive);
      sc.obstacles.standoff = o.value("standoff", sc.obstacles.standoff);
      sc.obstacles.aim_std = o.value("aim_std", sc.obstacles.aim_std);
    }
    if (j.contains("noise")) {
      sc.noise.position_std = j.at("noise").value("position_std", 0.0);
      sc.noise.velocity_std = j.at("noise").value("velocity_std", 0.0);
    }
    if (j.contains("timing")) {
      const auto& t = j.at("timing");
      sc.dt = t.value("dt", sc.dt);
      sc.tau = t.value("tau", sc.tau);
      sc.duration = t.value("duration", sc.duration);
    }
    sc.seed = j.value("seed", sc.seed);
    sc.mode = parse_mode(j.value("mode", std::string("lswarm")));
    sc.sense_radius = j.value("sense_radius", sc.sense_radius);
    sc.avoid_margin = j.value("avoid_margin", sc.avoid_margin);
    sc.max_neighbors = j.value("max_neighbors", sc.max_neighbors);
    if (j.contains("lut")) {
      const auto& l = j.at("lut");
      if (l.contains("path")) sc.lut_path = resolve(base, l.at("path").get<std::string>());
      sc.lut_step_deg = l.value("step_deg", sc.lut_step_deg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(load_json(path), path.parent_path());
}

std::vector<DynamicObstacle> spawn_pattern(const std::string& pattern, std::size_t count, std::uint64_t seed,
                                           const SpawnArena& arena, const ObstacleSpec& spec) {
  const bool ltr = pattern == "left-to-right";
  if (!ltr && pattern != "all-directions") {
    throw UnknownPatternError("unknown obstacle pattern '" + pattern + "'");
  }
  std::vector<DynamicObstacle> out;
  if (count == 0) {
    return out;
  }
  std::size_t usable = 0;
  for (const auto& p : arena.preferred) usable += p.empty() ? 0 : 1;
  if (usable == 0) {
    throw ValidationError("no preferred positions to aim obstacles at");
  }
  Vec3 axis{1.0, 0.0, 0.0};
  for (const auto& p : arena.preferred) {
    if (p.size() < 2) continue;
    const Vec3 d{p.back().x - p.front().x, p.back().y - p.front().y, 0.0};
    if (norm(d) > 1e-9) axis = normalized(d);
    break;
  }
  const Vec3 left{-axis.y, axis.x, 0.0};
  const double lead = spec.standoff / spec.speed;
  for (std::size_t i = 0; i < count; ++i) {
    SplitMix64 g{mix(seed ^ 0x6f627374ULL, i)};
    std::uniform_int_distribution<std::size_t> pick(0, arena.preferred.size() - 1);
    std::size_t k = pick(g);
    while (arena.preferred[k].empty()) k = (k + 1) % arena.preferred.size();
    const auto& pref = arena.preferred[k];
    const double t_end = static_cast<double>(pref.size() - 1) * arena.dt;
    const double t_min = std::min(2.0, 0.5 * t_end);
    const double t_hit = std::uniform_real_distribution<double>(t_min, std::max(t_min, t_end))(g);
    const auto idx = std::min(pref.size() - 1, static_cast<std::size_t>(std::llround(t_hit / arena.dt)));
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec3 aim = pref[idx];
    Vec3 heading;
    if (ltr) {
      aim += axis * (spec.aim_std * n01(g));
      aim.z += spec.aim_std * n01(g);
      heading = -left;
    } else {
      aim += Vec3{n01(g), n01(g), n01(g)} * spec.aim_std;
      Vec3 d{n01(g), n01(g), n01(g)};
      while (norm(d) < 1e-9) d = {n01(g), n01(g), n01(g)};
      heading = normalized(d);
    }
    DynamicObstacle o;
    o.velocity = heading * spec.speed;
    o.radius = spec.radius;
    o.non_reactive = spec.non_reactive;
    o.spawn = std::max(0.0, t_hit - lead);
    o.position = aim - o.velocity * (t_hit - o.spawn);
    o.despawn = t_hit + lead;
    out.push_back(o);
  }
  return out;
}

SpatialHash::SpatialHash(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0.0)) {
    throw OutOfRangeError("hash cell must be positive");
  }
  keyed_.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    auto c = [&](double v) { return static_cast<std::int64_t>(std::floor(v / cell_)); };
    const std::uint64_t key = (static_cast<std::uint64_t>(c(p.x) + (1 << 20)) << 42) |
                              (static_cast<std::uint64_t>(c(p.y) + (1 << 20)) << 21) |
                              static_cast<std::uint64_t>(c(p.z) + (1 << 20));
    keyed_.emplace_back(key, static_cast<std::uint32_t>(i));
  }
  std::sort(keyed_.begin(), keyed_.end());
}

void SpatialHash::query(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const {
  out.clear();
  auto c = [&](double v) { return static_cast<std::int64_t>(std::floor(v / cell_)); };
  const double r2 = radius * radius;
  for (std::int64_t ix = c(q.x - radius); ix <= c(q.x + radius); ++ix) {
    for (std::int64_t iy = c(q.y - radius); iy <= c(q.y + radius); ++iy) {
      for (std::int64_t iz = c(q.z - radius); iz <= c(q.z + radius); ++iz) {
        const std::uint64_t key = (static_cast<std::uint64_t>(ix + (1 << 20)) << 42) |
                                  (static_cast<std::uint64_t>(iy + (1 << 20)) << 21) |
                                  static_cast<std::uint64_t>(iz + (1 << 20));
        auto it = std::lower_bound(keyed_.begin(), keyed_.end(), std::make_pair(key, std::uint32_t{0}));
        for (; it != keyed_.end() && it->first == key; ++it) {
          if (norm_sq(points_[it->second] - q) <= r2) out.push_back(it->second);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<std::uint32_t> neighbor_query(std::span<const EntitySnapshot> world, std::size_t self,
                                          double radius) {
  if (!(radius > 0.0)) {
    throw OutOfRangeError("neighbor radius must be positive");
  }
  const std::vector<Vec3> pts = positions(world);
  const SpatialHash h(pts, radius);
  std::vector<std::uint32_t> out;
  h.query(world[self].position, radius, out);
  out.erase(std::remove(out.begin(), out.end(), static_cast<std::uint32_t>(self)), out.end());
  return out;
}

nlohmann::json metrics_to_json(const MetricsRecord& m, bool with_timings) {
  nlohmann::json j;
  j["overlap_ratio"] = m.overlap_ratio;
  j["overlap_ratio_resolution"] = m.overlap_ratio_resolution;
  j["coverage_loss"] = m.coverage_loss;
  j["uncovered_fraction"] = m.uncovered_fraction;
  j["min_separation"] = m.min_separation;
  j["min_clearance"] = m.min_clearance;
  j["min_building_clearance"] = m.min_building_clearance;
  j["agent_agent_collisions"] = m.agent_agent_collisions;
  j["agent_building_collisions"] = m.agent_building_collisions;
  j["agent_obstacle_collisions"] = m.agent_obstacle_collisions;
  j["max_accel_ratio"] = m.max_accel_ratio;
  j["gsd_violations"] = m.gsd_violations;
  j["selections"] = m.selections;
  j["dropped"] = m.dropped;
  j["steps"] = m.steps;
  j["sim_time"] = m.sim_time;
  j["per_agent"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.agents.size(); ++i) {
    j["per_agent"].push_back({{"id", i},
                              {"overlap", m.agents[i].overlap},
                              {"overlap_resolution", m.agents[i].overlap_resolution},
                              {"finished", m.agents[i].finished}});
  }
  if (with_timings) {
    double sum = 0.0;
    double mx = 0.0;
    for (double s : m.step_seconds) {
      sum += s;
      mx = std::max(mx, s);
    }
    const double mean = m.step_seconds.empty() ? 0.0 : sum / static_cast<double>(m.step_seconds.size());
    j["timing"] = {{"step_ms_mean", mean * 1e3}, {"step_ms_max", mx * 1e3}};
  }
  return j;
}

std::shared_ptr<const LookupTable> scenario_lut(const Scenario& sc) {
  static std::mutex mu;
  static std::map<std::tuple<std::string, double, double>, std::shared_ptr<const LookupTable>> cache;
  const auto key = std::make_tuple(sc.lut_path.string(), sc.agents.camera.theta_deg, sc.lut_step_deg);
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(key); it != cache.end()) {
    return it->second;
  }
  std::shared_ptr<const LookupTable> lut;
  if (!sc.lut_path.empty()) {
    lut = std::make_shared<const LookupTable>(read_lut(sc.lut_path));
  } else {
    LutHeader h;
    h.theta_deg = sc.agents.camera.theta_deg;
    h.step_deg = sc.lut_step_deg;
    lut = std::make_shared<const LookupTable>(build_lut(sc.agents.camera, h));
  }
  cache.emplace(key, lut);
  return lut;
}

void admit_obstacles(WorldState& state, double clear) {
  for (std::size_t j = 0; j < state.obstacles.size(); ++j) {
    DynamicObstacle& o = state.obstacles[j];
    if (state.entered[j] || !o.alive(state.t)) continue;
    state.entered[j] = 1;
    const double speed = norm(o.velocity);
    Vec3 q = o.position_at(state.t);
    double back = 0.0;
    if (speed > 0.0) {
      const Vec3 u = o.velocity / speed;
      for (int pass = 0; pass < 64; ++pass) {
        double s = 0.0;
        for (const AgentState& a : state.agents) {
          const Vec3 w = q - a.kin.position;
          const double wu = dot(w, u);
          const double disc = wu * wu - dot(w, w) + clear * clear;
          if (dot(w, w) < clear * clear && disc > 0.0) s = std::max(s, wu + std::sqrt(disc) + 1e-9);
        }
        if (s <= 0.0) break;
        q -= u * s;
        back += s;
      }
    }
    o.position = q;
    o.spawn = state.t;
    o.despawn += back / std::max(speed, 1e-12);
  }
}

WorldState initial_state(const Scenario& sc, std::vector<DynamicObstacle> obstacles) {
  WorldState s;
  for (std::vector<Vec3>& path : scenario_paths(sc)) {
    AgentState a;
    a.kin.position = path.front();
    a.kin.radius = sc.agents.radius;
    a.kin.max_speed = sc.agents.max_speed;
    a.kin.max_accel = sc.agents.max_accel;
    a.prog = PathProgress(std::move(path));
    const Vec3& p = a.kin.position;
    a.footprints.push_back(footprint_at({p.x, p.y}, p.z, 0.0, sc.agents.camera));
    s.agents.push_back(std::move(a));
  }
  s.obstacles = std::move(obstacles);
  s.entered.assign(s.obstacles.size(), 0);
  admit_obstacles(s, sc.sense_radius);
  return s;
}

StepStats step(WorldState& state, const Scenario& sc, const LookupTable* lut, int workers) {
  const std::vector<EntitySnapshot> world = snapshot(state);
  const std::vector<Vec3> pts = positions(world);
  const SpatialHash hash(pts, sc.sense_radius);
  const AgentConfig cfg = agent_config(sc);
  const std::size_t n = state.agents.size();
  std::vector<StepOutput> outs(n);

  auto one = [&](std::size_t i) {
    AgentState& ag = state.agents[i];
    std::vector<std::uint32_t> near;
    hash.query(ag.kin.position, sc.sense_radius, near);
    near.erase(std::remove(near.begin(), near.end(), static_cast<std::uint32_t>(i)), near.end());
    std::stable_sort(near.begin(), near.end(), [&](std::uint32_t x, std::uint32_t y) {
      return norm_sq(pts[x] - ag.kin.position) < norm_sq(pts[y] - ag.kin.position);
    });
    if (near.size() > sc.max_neighbors) near.resize(sc.max_neighbors);
    std::vector<Observation> obs;
    obs.reserve(near.size());
    for (std::uint32_t k : near) {
      const EntitySnapshot& e = world[k];
      Observation o;
      o.id = e.id;
      o.position = e.position;
      o.velocity = e.velocity;
      o.radius = e.radius;
      o.reactive = e.reactive;
      if (sc.noise.position_std > 0.0 || sc.noise.velocity_std > 0.0) {
        SplitMix64 g{mix(mix(mix(sc.seed, state.step), i), e.id)};
        std::normal_distribution<double> n01(0.0, 1.0);
        o.position += Vec3{n01(g), n01(g), n01(g)} * sc.noise.position_std;
        o.velocity += Vec3{n01(g), n01(g), n01(g)} * sc.noise.velocity_std;
      }
      obs.push_back(o);
    }
    outs[i] = agent_step(ag.kin, ag.prog, ag.mem, obs, sc.model, lut, sc.agents.camera, cfg);
  };

  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) one(i);
  } else {
    auto body = [&] {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) one(i);
      });
    };
    if (workers > 1) {
      tbb::task_arena arena(workers);
      arena.execute(body);
    } else {
      body();
    }
  }

  StepStats st;
  const double t1 = state.t + sc.dt;
  const double h_star = optimal_altitude(sc.agents.camera);
  for (std::size_t i = 0; i < n; ++i) {
    AgentState& ag = state.agents[i];
    const StepOutput& o = outs[i];
    const double amax = ag.kin.max_accel * sc.dt;
    st.max_accel_ratio = std::max(st.max_accel_ratio, distance(o.v, ag.kin.velocity) / amax);
    st.dropped += o.dropped;
    if (o.selected) {
      ++st.selections;
      // horizon samples above both the limit and the current altitude
      const double h = ag.kin.position.z;
      const double end = h + o.v.z * sc.tau;
      if (end > h && end > h_star && gsd(end, sc.agents.camera).worst() > sc.agents.camera.gsd_max) {
        ++st.gsd_violations;
      }
    }
    ag.kin.velocity = o.v;
    ag.kin.position += o.v * sc.dt;
    const Vec3& p = ag.kin.position;
    ag.footprints.push_back(footprint_at({p.x, p.y}, p.z, t1, sc.agents.camera));
  }
  state.t = t1;
  ++state.step;
  admit_obstacles(state, sc.sense_radius);
  return st;
}

namespace {

struct Contacts {
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<std::optional<std::size_t>> building;
};

// Rising edges of contact, separation extremes.
void account(const WorldState& s, const Scenario& sc, Contacts& c, MetricsRecord& m) {
  const std::vector<EntitySnapshot> w = snapshot(s);
  const std::vector<Vec3> pts = positions(w);
  double reach = sc.sense_radius;
  for (const EntitySnapshot& e : w) reach = std::max(reach, 2.0 * e.radius);
  const SpatialHash hash(pts, reach);
  std::set<std::pair<std::uint32_t, std::uint32_t>> now;
  std::vector<std::uint32_t> near;
  const std::size_t n = s.agents.size();
  for (std::size_t i = 0; i < n; ++i) {
    hash.query(pts[i], reach, near);
    for (std::uint32_t k : near) {
      if (k == i || (k < n && k < i)) continue;
      const double d = distance(pts[i], pts[k]);
      const double rr = w[i].radius + w[k].radius;
      if (k < n) {
        m.min_separation = std::min(m.min_separation, d);
        m.min_clearance = std::min(m.min_clearance, d - rr);
      }
      if (d < rr) {
        const auto key = std::make_pair(w[i].id, w[k].id);
        now.insert(key);
        if (!c.pairs.count(key)) {
          ++(k < n ? m.agent_agent_collisions : m.agent_obstacle_collisions);
        }
      }
    }
    std::optional<std::size_t> b;
    if (const auto near_b = sc.model.nearest(pts[i])) {
      m.min_building_clearance = std::min(m.min_building_clearance, near_b->distance - w[i].radius);
      if (near_b->distance < w[i].radius) b = near_b->building;
    }
    if (b && c.building[i] != b) ++m.agent_building_collisions;
    c.building[i] = b;
  }
  c.pairs = std::move(now);
}

bool all_done(const WorldState& s) {
  return std::all_of(s.agents.begin(), s.agents.end(), [](const AgentState& a) { return a.prog.done(); });
}

void trace_rows(const WorldState& s, std::string& out) {
  for (const EntitySnapshot& e : snapshot(s)) {
    if (e.kind == EntityKind::Agent) {
      const Footprint& f = s.agents[e.id].footprints.footprints().back();
      append_row(out, s.t, e, f.side, f.resolution_ok);
    } else {
      append_row(out, s.t, e, 0.0, false);
    }
  }
}

struct Simulated {
  WorldState state;
  MetricsRecord metrics;
  std::string trace;
  std::vector<std::vector<Vec3>> track;
};

Simulated simulate(const Scenario& sc, std::vector<DynamicObstacle> obstacles, const LookupTable* lut,
                   const RunOptions& opts) {
  Simulated r;
  r.state = initial_state(sc, std::move(obstacles));
  const std::size_t n = r.state.agents.size();
  Contacts c;
  c.building.assign(n, std::nullopt);
  r.track.resize(n);
  auto record = [&] {
    for (std::size_t i = 0; i < n; ++i) r.track[i].push_back(r.state.agents[i].kin.position);
    if (opts.record_trace) trace_rows(r.state, r.trace);
  };
  if (opts.record_trace) r.trace = "t,id,kind,x,y,z,vx,vy,vz,side,res_ok\n";
  account(r.state, sc, c, r.metrics);
  record();
  const auto max_steps = static_cast<std::size_t>(std::ceil(sc.duration / sc.dt - 1e-9));
  while (r.state.step < max_steps && !all_done(r.state)) {
    const auto t0 = std::chrono::steady_clock::now();
    const StepStats st = step(r.state, sc, lut, opts.workers);
    r.metrics.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    r.metrics.max_accel_ratio = std::max(r.metrics.max_accel_ratio, st.max_accel_ratio);
    r.metrics.gsd_violations += st.gsd_violations;
    r.metrics.selections += st.selections;
    r.metrics.dropped += st.dropped;
    account(r.state, sc, c, r.metrics);
    record();
  }
  r.metrics.steps = r.state.step;
  r.metrics.sim_time = r.state.t;
  return r;
}

}  // namespace

RunResult run(const Scenario& sc_in, const RunOptions& opts) {
  sc_in.validate();
  Scenario sc = sc_in;
  sc.agents.paths = scenario_paths(sc_in);
  std::shared_ptr<const LookupTable> lut = opts.lut;
  if (!lut && sc.mode == AvoidMode::LSwarm) {
    lut = scenario_lut(sc);
  }

  RunResult out;
  Simulated pref;
  const bool with_obstacles = sc.obstacles.count > 0;
  if (with_obstacles) {
    Scenario free = sc;
    free.obstacles.count = 0;
    RunOptions quiet = opts;
    quiet.record_trace = false;
    pref = simulate(free, {}, lut.get(), quiet);
    SpawnArena arena{pref.track, sc.dt};
    out.obstacles = spawn_pattern(sc.obstacles.pattern, static_cast<std::size_t>(sc.obstacles.count), sc.seed,
                                  arena, sc.obstacles);
  }
  Simulated act = simulate(sc, out.obstacles, lut.get(), opts);
  out.obstacles = act.state.obstacles;
  out.metrics = std::move(act.metrics);
  out.trace = std::move(act.trace);
  for (const AgentState& a : act.state.agents) out.actual.push_back(a.footprints);
  if (with_obstacles) {
    for (const AgentState& a : pref.state.agents) out.preferred.push_back(a.footprints);
  } else {
    out.preferred = out.actual;
  }

  const std::size_t n = out.actual.size();
  out.metrics.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.metrics.agents[i].finished = act.state.agents[i].prog.done();
  if (opts.compute_overlap) {
    const CameraModel& cam = sc.agents.camera;
    double sum = 0.0;
    double sum_res = 0.0;
    std::vector<Poly2> all_pref;
    std::vector<Poly2> all_act;
    for (std::size_t i = 0; i < n; ++i) {
      const double h0 = std::clamp(sc.agents.paths[i].front().z, 0.5, cam.sensing_range);
      OverlapOptions o;
      o.raster_cell = footprint_side(h0, cam) / 20.0;
      AgentMetrics& am = out.metrics.agents[i];
      am.overlap = overlap_ratio(out.preferred[i], out.actual[i], o);
      o.require_resolution = true;
      am.overlap_resolution = overlap_ratio(out.preferred[i], out.actual[i], o);
      sum += am.overlap;
      sum_res += am.overlap_resolution;
      for (Poly2& p : out.preferred[i].polygons(false)) all_pref.push_back(std::move(p));
      for (Poly2& p : out.actual[i].polygons(true)) all_act.push_back(std::move(p));
    }
    out.metrics.overlap_ratio = sum / static_cast<double>(n);
    out.metrics.overlap_ratio_resolution = sum_res / static_cast<double>(n);
    out.metrics.coverage_loss = 1.0 - out.metrics.overlap_ratio_resolution;
    double cell = 1e9;
    for (std::size_t i = 0; i < n; ++i) {
      cell = std::min(cell, footprint_side(std::clamp(sc.agents.paths[i].front().z, 0.5, cam.sensing_range), cam) /
                                20.0);
    }
    const RasterOverlap r = raster_overlap(all_pref, all_act, cell);
    out.metrics.uncovered_fraction = r.base_area > 0.0 ? 1.0 - r.shared_area / r.base_area : 0.0;
  }
  return out;
}

void write_trace(const std::string& trace, const std::filesystem::path& out) {
  std::ofstream f(out, std::ios::binary);
  if (!f) {
    throw Error("cannot write " + out.string());
  }
  f << trace;
  if (!f) {
    throw Error("write failed for " + out.string());
  }
}

}  // namespace lswarm
