#pragma once

#include <cstdint>
#include <span>

#include "lswarm/geom3.hpp"

namespace lswarm {

/// What produced a constraint. Also the order in which constraints are given
/// up when the intersection is empty: lowest first.
enum class ConstraintKind : std::uint8_t { Coverage = 0, Reactive = 1, NonReactive = 2, Static = 3 };

/// {v : (v - point)·normal >= 0} in velocity space.
struct HalfSpace {
  Vec3 point;
  Vec3 normal;
  ConstraintKind kind = ConstraintKind::Reactive;

  double margin(const Vec3& v) const { return dot(v - point, normal); }
  bool contains(const Vec3& v, double tol = 1e-9) const { return margin(v) >= -tol; }
};

struct AgentKinematics {
  Vec3 position;
  Vec3 velocity;
  double radius = 0.5;
  Vec3 pref_velocity;
  double max_speed = 2.0;
  double max_accel = 4.0;
};

/// Which velocity the half-spaces are built around.
enum class OptVelocity : std::uint8_t { Preferred, Current, Zero };

Vec3 opt_velocity(const AgentKinematics& a, OptVelocity mode);

/// True iff some t in [0, tau] puts t·v_rel strictly inside the ball of
/// radius r_sum around p_rel. Throws AlreadyCollidingError when |p_rel| <= r_sum.
bool vo_contains(const Vec3& v_rel, const Vec3& p_rel, double r_sum, double tau);

struct EscapeVector {
  Vec3 u;       ///< from v_rel to the nearest VO boundary point
  Vec3 normal;  ///< outward unit normal there
};

/// Smallest change of v_rel reaching the boundary of the truncated cone,
/// through either the cap sphere or the cone side.
/// Throws AlreadyCollidingError when |p_rel| <= r_sum.
EscapeVector escape_vector(const Vec3& v_rel, const Vec3& p_rel, double r_sum, double tau);

/// Overlapping pair: push apart along -p_rel so the gap closes within `dt`.
EscapeVector separation_vector(const Vec3& v_rel, const Vec3& p_rel, double r_sum, double dt);

/// Half responsibility: plane through v_opt + u/2.
/// With recover_dt > 0 an overlapping pair gets a separating constraint
/// instead of AlreadyCollidingError.
HalfSpace halfspace_reactive(const AgentKinematics& a, const AgentKinematics& b, double tau,
                             OptVelocity opt = OptVelocity::Preferred, double recover_dt = 0.0);

/// Full responsibility against something that will not move aside:
/// plane through v_opt + u.
HalfSpace halfspace_nonreactive(const AgentKinematics& a, const Vec3& obs_position,
                                const Vec3& obs_velocity, double obs_radius, double tau,
                                OptVelocity opt = OptVelocity::Preferred, double recover_dt = 0.0,
                                ConstraintKind kind = ConstraintKind::NonReactive);

struct SolveResult {
  Vec3 v;
  std::size_t dropped = 0;  ///< half-spaces dropped or left violated
};

/// argmin |v - pref| over the half-spaces, |v| <= max_speed and
/// |v - velocity| <= max_accel·dt. When the half-spaces cannot all hold they
/// Coverage half-spaces are dropped shallowest violation first. If that is
/// not enough, reactive and non-reactive half-spaces are shifted outward by
/// the smallest common margin that restores feasibility, keeping static ones
/// exact when they can hold alone. The acceleration ball is never relaxed.
SolveResult solve_velocity_ex(std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt);
Vec3 solve_velocity(std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt);

}  // namespace lswarm
