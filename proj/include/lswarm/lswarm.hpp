#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "lswarm/coverage.hpp"
#include "lswarm/environment.hpp"
#include "lswarm/kalman.hpp"
#include "lswarm/lut.hpp"
#include "lswarm/orca3d.hpp"

namespace lswarm {

/// Half-space against the nearest building point within `sense_range`,
/// treated as a static point obstacle of radius eps. Empty when nothing is
/// in range. Throws OutOfRangeError for eps <= 0.
std::vector<HalfSpace> static_halfspaces(const AgentKinematics& a, const UrbanModel& model, double eps,
                                         double sense_range, double tau,
                                         OptVelocity opt = OptVelocity::Current, double recover_dt = 0.0);

/// Progress along a waypoint list. `next` indexes the waypoint being flown to.
struct PathProgress {
  std::vector<Vec3> waypoints;
  std::size_t next = 1;
  double path_tolerance = 0.5;     ///< lateral distance counted as on-path, m
  double arrival_tolerance = 0.3;  ///< distance at which a waypoint counts as reached, m
  bool on_path = true;

  PathProgress() = default;
  /// Throws ValidationError for fewer than two waypoints or repeated neighbours.
  explicit PathProgress(std::vector<Vec3> wps, double path_tol = 0.5, double arrive_tol = 0.3);

  bool done() const { return next >= waypoints.size(); }
  const Vec3& prev_wp() const { return waypoints[next - 1]; }
  const Vec3& next_wp() const { return waypoints[next]; }
  const Vec3& goal() const { return waypoints.back(); }
};

/// Goal-directed velocity with segment projection: head for the next
/// waypoint while within path_tolerance of the current segment, otherwise
/// for the closest point on it. Advances `prog` on arrival. Speed is capped
/// so the final waypoint is not overshot within `dt`.
Vec3 preferred_velocity(const Vec3& position, PathProgress& prog, double cruise, double dt);

/// Plain ORCA behaviour: always straight at the next waypoint.
Vec3 waypoint_velocity(const Vec3& position, PathProgress& prog, double cruise, double dt);

struct SelectParams {
  double eps_sel = -1.0;        ///< < 0: 5% of |v_pref|
  std::size_t candidate_cap = 512;
  double tau = 2.0;             ///< horizon for the altitude check
  double ceiling = 1e9;         ///< highest altitude allowed over the horizon
  double floor = 0.0;           ///< lowest altitude allowed over the horizon
};

struct SelectResult {
  Vec3 v;
  bool fallback = true;           ///< v is v_orca
  std::optional<std::size_t> row;  ///< chosen LUT row
  std::size_t nearest_row = 0;     ///< LUT row nearest to v_orca in the v_pref frame
  std::size_t tested = 0;          ///< candidates checked against the half-spaces
};

/// Highest-overlap LUT direction, turned into the v_pref frame at |v_pref|,
/// that deviates from v_pref by at least δ + eps_sel, keeps the altitude
/// inside [floor, ceiling] over tau, stays in the speed and acceleration
/// balls, satisfies every half-space v_orca satisfies and violates none further
/// than v_orca does. Falls back to v_orca.
SelectResult select_velocity(const LookupTable& lut, const Vec3& v_pref, const Vec3& v_orca,
                             std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt,
                             const SelectParams& p);

/// Altitude band over which a velocity keeps gsd within gsd_max from altitude h.
bool altitude_ok(double h, double vz, double tau, double floor, double ceiling);

enum class AvoidMode : std::uint8_t { Orca, LSwarm };

/// What an agent senses about another entity this step.
struct Observation {
  std::uint32_t id = 0;
  Vec3 position;
  Vec3 velocity;
  double radius = 0.5;
  bool reactive = true;  ///< swarm agent (shares the avoidance effort)
};

struct AgentConfig {
  AvoidMode mode = AvoidMode::LSwarm;
  double tau = 2.0;
  double tau_static = 2.0;
  double dt = 0.05;
  double cruise = 1.0;
  double static_eps = 0.1;
  double avoid_margin = 0.1;  ///< added to every observed radius, both modes
  double static_range = 10.0;
  OptVelocity opt = OptVelocity::Current;
  bool use_kalman = true;
  KalmanParams kalman;
  SelectParams select;
  double floor = 1.0;  ///< lowest flying altitude kept by the coverage constraint
};

/// Per-agent state carried between steps.
struct AgentMemory {
  std::map<std::uint32_t, KalmanTracker> trackers;
};

struct StepOutput {
  Vec3 v;
  Vec3 v_pref;
  Vec3 v_orca;
  std::size_t dropped = 0;
  bool selected = false;  ///< a LUT candidate replaced v_orca
  std::size_t lut_row = 0;
  std::size_t orca_row = 0;
  double ceiling = 0.0;
  std::size_t halfspaces = 0;
};

/// Altitude up to which a footprint keeps gsd within gsd_max, raised to the
/// planned altitude where the plan itself overflies buildings.
double resolution_ceiling(const CameraModel& cam, const PathProgress& prog);

/// One pass of the per-agent loop: track others, inflate their radii, build
/// reactive, non-reactive and static half-spaces, solve, then pick the
/// coverage-maximal LUT velocity. `a.pref_velocity` is overwritten.
/// `lut` may be null in Orca mode.
StepOutput agent_step(AgentKinematics& a, PathProgress& prog, AgentMemory& mem,
                      std::span<const Observation> seen, const UrbanModel& model, const LookupTable* lut,
                      const CameraModel& cam, const AgentConfig& cfg);

}  // namespace lswarm
