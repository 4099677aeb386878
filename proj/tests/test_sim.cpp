#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "lswarm/errors.hpp"
#include "lswarm/sim.hpp"

using namespace lswarm;

namespace {

Scenario line_scenario() {
  Scenario sc;
  sc.model = UrbanModel("open", 40, 20, {});
  sc.agents.camera.theta_deg = rad2deg(std::atan(0.4));
  sc.agents.paths = {{{10, 10, 5}, {30, 10, 5}}};
  sc.duration = 40;
  return sc;
}

RunOptions quick(int workers = 1) {
  RunOptions o;
  o.workers = workers;
  o.record_trace = false;
  return o;
}

SpawnArena line_arena() {
  SpawnArena a;
  a.dt = 0.05;
  a.preferred.emplace_back();
  for (int k = 0; k <= 400; ++k) a.preferred[0].push_back({10 + 0.05 * k, 10, 5});
  return a;
}

}  // namespace

TEST_CASE("single agent in an empty world advances by v_pref dt") {
  for (AvoidMode m : {AvoidMode::Orca, AvoidMode::LSwarm}) {
    Scenario sc = line_scenario();
    sc.mode = m;
    WorldState s = initial_state(sc, {});
    s.agents[0].kin.velocity = {1, 0, 0};
    const Vec3 p0 = s.agents[0].kin.position;
    step(s, sc, scenario_lut(sc).get(), 1);
    CHECK(distance(s.agents[0].kin.position, p0 + Vec3{sc.dt, 0, 0}) < 1e-12);
    CHECK(s.t == doctest::Approx(sc.dt));
    CHECK(s.step == 1);
  }
}

TEST_CASE("head-on pair keeps its distance") {
  for (AvoidMode m : {AvoidMode::Orca, AvoidMode::LSwarm}) {
    Scenario sc = line_scenario();
    sc.mode = m;
    sc.agents.count = 2;
    sc.agents.paths = {{{5, 10, 5}, {35, 10, 5}}, {{35, 10, 5}, {5, 10, 5}}};
    sc.duration = 60;
    const MetricsRecord r = run(sc, quick()).metrics;
    CHECK(r.min_separation >= 2 * sc.agents.radius);
    CHECK(r.agent_agent_collisions == 0);
    CHECK(r.max_accel_ratio <= 1.0 + 1e-9);

    // exact symmetry brakes both to a stop; sensing noise breaks the tie
    sc.noise = {0.05, 0.05};
    for (std::uint64_t seed : {1, 2, 3}) {
      sc.seed = seed;
      const MetricsRecord n = run(sc, quick()).metrics;
      CHECK(n.min_separation >= 2 * sc.agents.radius);
      CHECK(n.agents[0].finished);
      CHECK(n.agents[1].finished);
    }
  }
}

TEST_CASE("same seed gives identical traces serial and parallel") {
  Scenario sc = load_scenario("data/scenarios/left-to-right-20.json");
  sc.duration = 12;
  RunOptions o;
  o.workers = 1;
  const std::string a = run(sc, o).trace;
  const std::string b = run(sc, o).trace;
  o.workers = 4;
  const std::string c = run(sc, o).trace;
  CHECK(a.size() > 1000);
  CHECK(a == b);
  CHECK(a == c);

  Scenario fx = load_scenario("data/scenarios/high_dense.json");
  fx.duration = 4;
  o.workers = 1;
  const std::string d = run(fx, o).trace;
  o.workers = 0;
  CHECK(d == run(fx, o).trace);
}

TEST_CASE("neighbor_query") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  std::vector<EntitySnapshot> world;
  for (std::uint32_t i = 0; i < 100; ++i) {
    EntitySnapshot e;
    e.id = i;
    e.position = {u(rng), u(rng), u(rng) * 0.5};
    world.push_back(e);
  }
  for (double radius : {0.5, 2.0, 3.7, 6.0}) {
    for (std::size_t i = 0; i < world.size(); ++i) {
      std::vector<std::uint32_t> brute;
      for (std::size_t k = 0; k < world.size(); ++k) {
        if (k != i && distance(world[k].position, world[i].position) <= radius) {
          brute.push_back(static_cast<std::uint32_t>(k));
        }
      }
      CHECK(neighbor_query(world, i, radius) == brute);
    }
  }

  std::vector<EntitySnapshot> pair(2);
  pair[0].position = {1, 1, 1};
  pair[1].position = {3, 1, 1};
  CHECK(neighbor_query(pair, 0, 2.0) == std::vector<std::uint32_t>{1});
  CHECK(neighbor_query(pair, 0, 2.0 - 1e-9).empty());
  CHECK(neighbor_query(pair, 1, 1e-9).empty());
  CHECK_THROWS_AS(neighbor_query(pair, 0, 0.0), OutOfRangeError);
}

TEST_CASE("spawn_pattern") {
  const SpawnArena arena = line_arena();
  ObstacleSpec spec;
  CHECK(spawn_pattern("left-to-right", 0, 1, arena, spec).empty());
  CHECK_THROWS_AS(spawn_pattern("zigzag", 3, 1, arena, spec), UnknownPatternError);

  const auto ltr = spawn_pattern("left-to-right", 20, 3, arena, spec);
  REQUIRE(ltr.size() == 20);
  for (const DynamicObstacle& o : ltr) {
    CHECK(std::abs(o.velocity.x) < 1e-12);
    CHECK(std::abs(o.velocity.z) < 1e-12);
    CHECK(o.velocity.y == doctest::Approx(-spec.speed));
    CHECK(o.radius == spec.radius);
    CHECK(o.spawn < o.despawn);
  }

  // smaller counts are prefixes, and the seed matters
  const auto ltr5 = spawn_pattern("left-to-right", 5, 3, arena, spec);
  for (std::size_t i = 0; i < ltr5.size(); ++i) CHECK(ltr5[i].position == ltr[i].position);
  CHECK(spawn_pattern("left-to-right", 5, 4, arena, spec)[0].position != ltr[0].position);

  // octants of the heading, 8 bins of 5 expected; chi-square, 7 dof, p = 0.01 at 18.475
  const auto ad = spawn_pattern("all-directions", 40, 11, arena, spec);
  std::array<int, 8> bins{};
  for (const DynamicObstacle& o : ad) {
    CHECK(norm(o.velocity) == doctest::Approx(spec.speed));
    const int b = (o.velocity.x > 0 ? 1 : 0) | (o.velocity.y > 0 ? 2 : 0) | (o.velocity.z > 0 ? 4 : 0);
    ++bins[static_cast<std::size_t>(b)];
  }
  double chi2 = 0.0;
  for (int c : bins) chi2 += (c - 5.0) * (c - 5.0) / 5.0;
  CHECK(chi2 < 18.475);

  // each obstacle passes its aim point near the preferred path
  for (const DynamicObstacle& o : ad) {
    double closest = 1e9;
    for (const Vec3& p : arena.preferred[0]) {
      const Vec3 w = p - o.position;
      const Vec3 d = normalized(o.velocity);
      closest = std::min(closest, norm(w - d * dot(w, d)));
    }
    CHECK(closest < 5 * spec.aim_std);
  }
}

TEST_CASE("obstacles enter from outside the sensing range") {
  Scenario sc = line_scenario();
  DynamicObstacle o;
  o.position = {11, 10, 5};
  o.velocity = {-2, 0, 0};
  o.spawn = 0.0;
  o.despawn = 5.0;
  WorldState s = initial_state(sc, {o});
  const DynamicObstacle& in = s.obstacles[0];
  CHECK(distance(in.position, s.agents[0].kin.position) == doctest::Approx(sc.sense_radius));
  CHECK(in.position.x > 11);
  CHECK(in.position.y == 10);
  CHECK(in.velocity == o.velocity);
  CHECK(in.despawn == doctest::Approx(5.0 + (in.position.x - 11) / 2));

  // far away: untouched
  o.position = {30, 10, 5};
  WorldState far = initial_state(sc, {o});
  CHECK(far.obstacles[0].position == o.position);
  CHECK(far.obstacles[0].despawn == o.despawn);
}

TEST_CASE("no obstacles keeps the preferred trace") {
  for (AvoidMode m : {AvoidMode::Orca, AvoidMode::LSwarm}) {
    Scenario sc = line_scenario();
    sc.mode = m;
    sc.noise = {0.05, 0.05};
    const MetricsRecord r = run(sc, quick()).metrics;
    CHECK(r.overlap_ratio == doctest::Approx(1.0));
    CHECK(r.overlap_ratio_resolution == doctest::Approx(1.0));
    CHECK(r.coverage_loss == doctest::Approx(0.0));
    CHECK(r.agent_agent_collisions == 0);
    CHECK(r.agent_obstacle_collisions == 0);
    CHECK(r.agent_building_collisions == 0);
  }
}

TEST_CASE("metrics stay in range and serialize") {
  Scenario sc = load_scenario("data/scenarios/left-to-right-20.json");
  sc.seed = 5;
  const RunResult r = run(sc, quick());
  const MetricsRecord& m = r.metrics;
  CHECK(m.overlap_ratio >= 0.0);
  CHECK(m.overlap_ratio <= 1.0);
  CHECK(m.overlap_ratio_resolution <= m.overlap_ratio + 1e-12);
  CHECK(m.uncovered_fraction >= 0.0);
  CHECK(m.uncovered_fraction <= 1.0);
  CHECK(m.steps == m.step_seconds.size());
  CHECK(r.obstacles.size() == 20);

  const nlohmann::json j = metrics_to_json(m, false);
  CHECK(j.at("overlap_ratio").get<double>() == m.overlap_ratio);
  CHECK(j.at("agent_building_collisions").get<std::uint64_t>() == m.agent_building_collisions);
  CHECK_FALSE(j.contains("timing"));
  CHECK(metrics_to_json(m, true).contains("timing"));
}

TEST_CASE("scenario validation") {
  Scenario sc = line_scenario();
  CHECK_NOTHROW(sc.validate());
  sc.dt = 0.0;
  CHECK_THROWS_AS(sc.validate(), ValidationError);
  sc = line_scenario();
  sc.dt = 3.0;  // above tau
  CHECK_THROWS_AS(sc.validate(), ValidationError);
  CHECK_THROWS_AS(parse_mode("rvo"), ValidationError);
  CHECK(parse_mode("orca") == AvoidMode::Orca);
  CHECK(std::string(mode_name(AvoidMode::LSwarm)) == "lswarm");
  CHECK_THROWS(load_scenario("data/scenarios/does-not-exist.json"));
}

TEST_CASE("crossing obstacles next to a building") {
  // both lines are clear of the wall; obstacles from the left push toward it
  Scenario sc = line_scenario();
  sc.model = UrbanModel("wall", 30, 30, {Box3{{5, 0, 0}, {25, 9, 15}}});
  sc.agents.count = 2;
  sc.agents.paths = {{{0, 10, 5}, {30, 10, 5}}, {{0, 12.5, 5}, {30, 12.5, 5}}};
  sc.obstacles.count = 10;
  sc.obstacles.pattern = "left-to-right";
  sc.duration = 60;
  std::uint64_t orca_hits = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    sc.seed = seed;
    sc.mode = AvoidMode::LSwarm;
    const MetricsRecord ls = run(sc, quick()).metrics;
    CHECK(ls.agent_building_collisions == 0);
    CHECK(ls.min_building_clearance > 0.0);
    CHECK(ls.agent_agent_collisions == 0);
    sc.mode = AvoidMode::Orca;
    orca_hits += run(sc, quick()).metrics.agent_building_collisions;
  }
  CHECK(orca_hits > 0);
}
