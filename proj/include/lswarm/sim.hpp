#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lswarm/coverage.hpp"
#include "lswarm/environment.hpp"
#include "lswarm/lawnmower.hpp"
#include "lswarm/lswarm.hpp"
#include "lswarm/lut.hpp"

namespace lswarm {

struct AgentSpec {
  int count = 1;
  double radius = 0.5;
  double cruise = 1.0;
  double max_speed = 1.5;
  double max_accel = 4.0;
  CameraModel camera;
  /// Explicit waypoint lists, one per agent. Empty: lawnmower plan over the model.
  std::vector<std::vector<Vec3>> paths;
  PlanConfig plan;
};

struct ObstacleSpec {
  int count = 0;
  std::string pattern = "left-to-right";
  double speed = 2.0;
  double radius = 0.6;
  bool non_reactive = true;
  double standoff = 8.0;  ///< distance travelled before reaching the aim point, m
  double aim_std = 0.3;   ///< spread of the aim point around the preferred position, m
};

struct NoiseSpec {
  double position_std = 0.0;
  double velocity_std = 0.0;
};

struct Scenario {
  std::string id = "scenario";
  UrbanModel model;
  AgentSpec agents;
  ObstacleSpec obstacles;
  NoiseSpec noise;
  double dt = 0.05;
  double tau = 2.0;
  double duration = 60.0;  ///< upper bound; the run stops earlier once every agent is done
  std::uint64_t seed = 1;
  AvoidMode mode = AvoidMode::LSwarm;
  double sense_radius = 6.0;
  std::size_t max_neighbors = 15;
  double avoid_margin = 0.1;  ///< added to observed radii, m
  std::filesystem::path lut_path;  ///< empty: build one in memory
  double lut_step_deg = 1.0;

  /// Throws ValidationError.
  void validate() const;
};

/// Relative paths inside the file resolve against `base`.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
/// Throws ParseError or ValidationError.
Scenario load_scenario(const std::filesystem::path& path);

AvoidMode parse_mode(const std::string& s);
const char* mode_name(AvoidMode m);

/// Straight line at constant velocity between spawn and despawn time.
struct DynamicObstacle {
  Vec3 position;  ///< at spawn time
  Vec3 velocity;
  double radius = 0.6;
  double spawn = 0.0;
  double despawn = 1e9;
  bool non_reactive = true;

  Vec3 position_at(double t) const { return position + velocity * (t - spawn); }
  bool alive(double t) const { return t >= spawn && t < despawn; }
};

/// What obstacle patterns are aimed at: preferred positions of every agent
/// sampled every `dt`, from a zero-obstacle run.
struct SpawnArena {
  std::vector<std::vector<Vec3>> preferred;
  double dt = 0.05;
};

/// "left-to-right": level crossings perpendicular to the first agent's path
/// axis, all from its left. "all-directions": headings uniform on the
/// sphere. Every obstacle is aimed at a preferred position at a random time.
/// Obstacle i only depends on (seed, i), so smaller counts are prefixes.
/// Throws UnknownPatternError.
std::vector<DynamicObstacle> spawn_pattern(const std::string& pattern, std::size_t count, std::uint64_t seed,
                                           const SpawnArena& arena, const ObstacleSpec& spec);

enum class EntityKind : std::uint8_t { Agent, Obstacle };

struct EntitySnapshot {
  std::uint32_t id = 0;
  EntityKind kind = EntityKind::Agent;
  Vec3 position;
  Vec3 velocity;
  double radius = 0.5;
  bool reactive = true;
};

/// Uniform 3-D grid over a fixed point set.
class SpatialHash {
 public:
  SpatialHash(std::span<const Vec3> points, double cell);
  /// Indices with |p_i - q| <= radius, ascending. radius must not exceed the cell.
  void query(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const;

 private:
  std::span<const Vec3> points_;
  double cell_;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed_;  // sorted by cell key
};

/// Entities within the closed ball around entity `self` (itself excluded),
/// ascending index. Throws OutOfRangeError for radius <= 0.
std::vector<std::uint32_t> neighbor_query(std::span<const EntitySnapshot> world, std::size_t self,
                                          double radius);

struct AgentState {
  AgentKinematics kin;
  PathProgress prog;
  AgentMemory mem;
  CoverageTrace footprints;
};

struct WorldState {
  std::size_t step = 0;
  double t = 0.0;
  std::vector<AgentState> agents;
  std::vector<DynamicObstacle> obstacles;
  std::vector<std::uint8_t> entered;  ///< per obstacle, set once admitted
};

struct AgentMetrics {
  double overlap = 1.0;
  double overlap_resolution = 1.0;
  bool finished = false;
};

struct MetricsRecord {
  std::vector<AgentMetrics> agents;
  double overlap_ratio = 1.0;             ///< mean over agents
  double overlap_ratio_resolution = 1.0;  ///< mean over agents, gsd-compliant footprints only
  double coverage_loss = 0.0;             ///< 1 - overlap_ratio_resolution
  double uncovered_fraction = 0.0;        ///< of the joint preferred area
  double min_separation = 1e9;            ///< closest agent pair, centre distance
  double min_clearance = 1e9;             ///< closest agent pair, distance minus both radii
  double min_building_clearance = 1e9;    ///< closest agent to a building, distance minus radius
  std::uint64_t agent_agent_collisions = 0;
  std::uint64_t agent_building_collisions = 0;
  std::uint64_t agent_obstacle_collisions = 0;
  double max_accel_ratio = 0.0;  ///< max |Δv| / (a_max·dt) over all agent steps
  std::uint64_t gsd_violations = 0;
  std::uint64_t selections = 0;
  std::uint64_t dropped = 0;
  std::size_t steps = 0;
  double sim_time = 0.0;
  std::vector<double> step_seconds;  ///< wall-clock, not part of the deterministic output
};

nlohmann::json metrics_to_json(const MetricsRecord& m, bool with_timings = true);

struct RunOptions {
  int workers = 0;                                 ///< 1: serial loop, <= 0: TBB default
  std::shared_ptr<const LookupTable> lut;          ///< null: load or build from the scenario
  bool record_trace = true;
  bool compute_overlap = true;
};

struct RunResult {
  MetricsRecord metrics;
  std::string trace;  ///< CSV: t,id,kind,x,y,z,vx,vy,vz,side,res_ok
  std::vector<CoverageTrace> actual;
  std::vector<CoverageTrace> preferred;
  std::vector<DynamicObstacle> obstacles;
};

/// Look-up table for the scenario camera, cached per process by header.
std::shared_ptr<const LookupTable> scenario_lut(const Scenario& sc);

/// Obstacles becoming alive at state.t enter from outside every agent's
/// sensing range: the entry point moves back along their line until it is
/// at least `clear` from all agents, and the remaining schedule shifts with it.
void admit_obstacles(WorldState& state, double clear);

/// Agents at their first waypoints, at rest, obstacles as given.
WorldState initial_state(const Scenario& sc, std::vector<DynamicObstacle> obstacles);

struct StepStats {
  double max_accel_ratio = 0.0;
  std::uint64_t gsd_violations = 0;
  std::uint64_t selections = 0;
  std::uint64_t dropped = 0;
};

/// One tick: snapshot, per-agent loop on the snapshot, then Euler update of
/// agents and obstacles and footprint recording.
StepStats step(WorldState& state, const Scenario& sc, const LookupTable* lut, int workers = 0);

/// Runs to completion. With obstacles, the preferred traces come from the
/// same scenario run with none.
RunResult run(const Scenario& sc, const RunOptions& opts = {});

void write_trace(const std::string& trace, const std::filesystem::path& out);

}  // namespace lswarm
