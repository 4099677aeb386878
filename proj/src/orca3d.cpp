#include "lswarm/orca3d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "lswarm/errors.hpp"

namespace lswarm {

namespace {

constexpr double kEps = 1e-10;

struct Ball {
  Vec3 c;
  double r = 0.0;
};

struct Disc {
  Vec2 c;
  double r = 0.0;
};

// g·x >= c with |g| = 1
struct HalfPlane {
  Vec2 g;
  double c = 0.0;
};

double norm2(const Vec2& a) { return std::sqrt(dot(a, a)); }

Vec3 any_perpendicular(const Vec3& unit) {
  Vec3 e = cross(unit, {0.0, 0.0, 1.0});
  if (norm(e) < 1e-9) {
    e = cross(unit, {1.0, 0.0, 0.0});
  }
  return e / norm(e);
}

Vec3 project_ball(const Vec3& t, const Ball& b) {
  const Vec3 d = t - b.c;
  const double l = norm(d);
  return l <= b.r ? t : b.c + d * (b.r / l);
}

Vec2 project_disc(const Vec2& t, const Disc& b) {
  const Vec2 d = t - b.c;
  const double l = norm2(d);
  return l <= b.r ? t : b.c + d * (b.r / l);
}

bool in_ball(const Vec3& v, const Ball& b) { return distance(v, b.c) <= b.r + kEps; }
bool in_disc(const Vec2& v, const Disc& b) { return norm2(v - b.c) <= b.r + kEps; }

std::optional<Vec3> closest_in_balls(const Vec3& t, const Ball& b1, const Ball& b2) {
  if (in_ball(t, b1) && in_ball(t, b2)) {
    return t;
  }
  const Vec3 p1 = project_ball(t, b1);
  if (in_ball(p1, b2)) {
    return p1;
  }
  const Vec3 p2 = project_ball(t, b2);
  if (in_ball(p2, b1)) {
    return p2;
  }
  // Both spheres active: nearest point on their circle of intersection.
  const Vec3 axis = b2.c - b1.c;
  const double d = norm(axis);
  if (d < kEps || d > b1.r + b2.r + kEps) {
    return std::nullopt;
  }
  const Vec3 e = axis / d;
  const double a = (d * d + b1.r * b1.r - b2.r * b2.r) / (2.0 * d);
  const double rho2 = b1.r * b1.r - a * a;
  if (rho2 < -kEps) {
    return std::nullopt;
  }
  const Vec3 m = b1.c + e * a;
  const double rho = std::sqrt(std::max(0.0, rho2));
  Vec3 dir = t - m;
  dir -= e * dot(dir, e);
  const double l = norm(dir);
  dir = l > 1e-12 ? dir / l : any_perpendicular(e);
  return m + dir * rho;
}

std::optional<Vec2> closest_in_discs(const Vec2& t, const Disc& b1, const Disc& b2) {
  if (in_disc(t, b1) && in_disc(t, b2)) {
    return t;
  }
  const Vec2 p1 = project_disc(t, b1);
  if (in_disc(p1, b2)) {
    return p1;
  }
  const Vec2 p2 = project_disc(t, b2);
  if (in_disc(p2, b1)) {
    return p2;
  }
  const Vec2 axis = b2.c - b1.c;
  const double d = norm2(axis);
  if (d < kEps || d > b1.r + b2.r + kEps) {
    return std::nullopt;
  }
  const Vec2 e = axis * (1.0 / d);
  const double a = (d * d + b1.r * b1.r - b2.r * b2.r) / (2.0 * d);
  const double h2 = b1.r * b1.r - a * a;
  if (h2 < -kEps) {
    return std::nullopt;
  }
  const double h = std::sqrt(std::max(0.0, h2));
  const Vec2 m = b1.c + e * a;
  const Vec2 perp{-e.y, e.x};
  const Vec2 q1 = m + perp * h;
  const Vec2 q2 = m - perp * h;
  return norm2(q1 - t) <= norm2(q2 - t) ? q1 : q2;
}

// Closest point to t on the line {q + s·d} inside the discs and the first
// `count` half-planes.
std::optional<Vec2> solve_line(const Vec2& t, const Vec2& q, const Vec2& d, std::span<const Disc> discs,
                               std::span<const HalfPlane> planes) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const Disc& b : discs) {
    const double s0 = dot(b.c - q, d);
    const Vec2 foot = q + d * s0;
    const double off2 = dot(foot - b.c, foot - b.c);
    const double h2 = b.r * b.r - off2;
    if (h2 < -kEps) {
      return std::nullopt;
    }
    const double h = std::sqrt(std::max(0.0, h2));
    lo = std::max(lo, s0 - h);
    hi = std::min(hi, s0 + h);
  }
  for (const HalfPlane& hp : planes) {
    const double gd = dot(hp.g, d);
    const double gq = dot(hp.g, q);
    if (std::abs(gd) < 1e-12) {
      if (gq < hp.c - kEps) {
        return std::nullopt;
      }
      continue;
    }
    const double s = (hp.c - gq) / gd;
    if (gd > 0.0) {
      lo = std::max(lo, s);
    } else {
      hi = std::min(hi, s);
    }
  }
  if (lo > hi + kEps) {
    return std::nullopt;
  }
  if (lo > hi) {
    lo = hi = 0.5 * (lo + hi);
  }
  const double s = std::clamp(dot(t - q, d), lo, hi);
  return q + d * s;
}

// Closest point to `target` on the plane of `on`, inside the balls and the
// half-spaces `prior`.
std::optional<Vec3> solve_plane(const Vec3& target, const HalfSpace& on, std::span<const HalfSpace> prior,
                                const Ball& b1, const Ball& b2) {
  const Vec3 o = on.point;
  const Vec3 n = on.normal;
  const Vec3 e1 = any_perpendicular(n);
  const Vec3 e2 = cross(n, e1);
  auto to2 = [&](const Vec3& x) { return Vec2{dot(x - o, e1), dot(x - o, e2)}; };

  Disc discs[2];
  const Ball* balls[2] = {&b1, &b2};
  for (int k = 0; k < 2; ++k) {
    const double off = dot(balls[k]->c - o, n);
    const double r2 = balls[k]->r * balls[k]->r - off * off;
    if (r2 < -kEps) {
      return std::nullopt;
    }
    discs[k] = {to2(balls[k]->c), std::sqrt(std::max(0.0, r2))};
  }

  std::vector<HalfPlane> planes;
  planes.reserve(prior.size());
  for (const HalfSpace& h : prior) {
    const Vec2 g{dot(h.normal, e1), dot(h.normal, e2)};
    const double c = dot(h.normal, h.point - o);
    const double gl = norm2(g);
    if (gl < 1e-12) {
      // Parallel plane: all or nothing.
      if (c > kEps) {
        return std::nullopt;
      }
      continue;
    }
    planes.push_back({g * (1.0 / gl), c / gl});
  }

  const Vec2 t2 = to2(target);
  std::optional<Vec2> x = closest_in_discs(t2, discs[0], discs[1]);
  if (!x) {
    return std::nullopt;
  }
  for (std::size_t k = 0; k < planes.size(); ++k) {
    if (dot(planes[k].g, *x) >= planes[k].c - kEps) {
      continue;
    }
    const Vec2 q = planes[k].g * planes[k].c;
    const Vec2 d{-planes[k].g.y, planes[k].g.x};
    x = solve_line(t2, q, d, discs, std::span(planes).first(k));
    if (!x) {
      return std::nullopt;
    }
  }
  return o + e1 * x->x + e2 * x->y;
}

std::optional<Vec3> solve_exact(const Vec3& target, std::span<const HalfSpace> hs, const Ball& b1,
                                const Ball& b2) {
  std::optional<Vec3> v = closest_in_balls(target, b1, b2);
  if (!v) {
    return std::nullopt;
  }
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (hs[i].margin(*v) >= -kEps) {
      continue;
    }
    v = solve_plane(target, hs[i], hs.first(i), b1, b2);
    if (!v) {
      return std::nullopt;
    }
  }
  return v;
}

}  // namespace

Vec3 opt_velocity(const AgentKinematics& a, OptVelocity mode) {
  switch (mode) {
    case OptVelocity::Preferred:
      return a.pref_velocity;
    case OptVelocity::Current:
      return a.velocity;
    case OptVelocity::Zero:
      break;
  }
  return {};
}

bool vo_contains(const Vec3& v_rel, const Vec3& p_rel, double r_sum, double tau) {
  if (norm_sq(p_rel) <= r_sum * r_sum) {
    throw AlreadyCollidingError("relative distance within combined radius");
  }
  const double vv = norm_sq(v_rel);
  const double t = vv > 0.0 ? std::clamp(dot(v_rel, p_rel) / vv, 0.0, tau) : 0.0;
  return norm_sq(v_rel * t - p_rel) < r_sum * r_sum;
}

EscapeVector escape_vector(const Vec3& v, const Vec3& p, double r, double tau) {
  const double dist_sq = norm_sq(p);
  if (dist_sq <= r * r) {
    throw AlreadyCollidingError("relative distance within combined radius");
  }
  const Vec3 w = v - p / tau;
  const double wp = dot(w, p);
  if (wp < 0.0 && wp * wp > r * r * norm_sq(w)) {
    // nearest boundary is the cap sphere
    const double wl = norm(w);
    const Vec3 n = wl > 1e-12 ? w / wl : -p / std::sqrt(dist_sq);
    return {n * (r / tau - wl), n};
  }
  // nearest boundary is a cone generator: work in the plane of p and v
  const double dist = std::sqrt(dist_sq);
  const Vec3 axis = p / dist;
  const double sin_phi = r / dist;
  const double cos_phi = std::sqrt(1.0 - sin_phi * sin_phi);
  Vec3 side = v - axis * dot(v, axis);
  const double sl = norm(side);
  side = sl > 1e-12 * std::max(1.0, norm(v)) ? side / sl : any_perpendicular(axis);
  const Vec3 n = side * cos_phi - axis * sin_phi;
  return {n * -dot(v, n), n};
}

EscapeVector separation_vector(const Vec3& v_rel, const Vec3& p_rel, double r_sum, double dt) {
  const double d = norm(p_rel);
  const Vec3 n = d > 1e-12 ? -p_rel / d : Vec3{0.0, 0.0, 1.0};
  const double need = (r_sum - d) / dt;
  return {n * (need - dot(v_rel, n)), n};
}

HalfSpace halfspace_reactive(const AgentKinematics& a, const AgentKinematics& b, double tau, OptVelocity opt,
                             double recover_dt) {
  const Vec3 va = opt_velocity(a, opt);
  const Vec3 vb = opt_velocity(b, opt);
  const Vec3 p = b.position - a.position;
  const double r = a.radius + b.radius;
  EscapeVector e;
  if (recover_dt > 0.0 && norm_sq(p) <= r * r) {
    e = separation_vector(va - vb, p, r, recover_dt);
  } else {
    e = escape_vector(va - vb, p, r, tau);
  }
  return {va + e.u * 0.5, e.normal, ConstraintKind::Reactive};
}

HalfSpace halfspace_nonreactive(const AgentKinematics& a, const Vec3& obs_position, const Vec3& obs_velocity,
                                double obs_radius, double tau, OptVelocity opt, double recover_dt,
                                ConstraintKind kind) {
  const Vec3 va = opt_velocity(a, opt);
  const Vec3 p = obs_position - a.position;
  const double r = a.radius + obs_radius;
  EscapeVector e;
  if (recover_dt > 0.0 && norm_sq(p) <= r * r) {
    e = separation_vector(va - obs_velocity, p, r, recover_dt);
  } else {
    e = escape_vector(va - obs_velocity, p, r, tau);
  }
  return {va + e.u, e.normal, kind};
}

namespace {

SolveResult solve_within_tolerance(std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt) {
  const Ball speed{{}, a.max_speed};
  const Ball accel{a.velocity, a.max_accel * dt};

  if (auto v = solve_exact(a.pref_velocity, halfspaces, speed, accel)) {
    return {*v, 0};
  }

  // Reference point for violation depth: the optimum with no half-spaces.
  std::optional<Vec3> base = closest_in_balls(a.pref_velocity, speed, accel);
  if (!base) {
    // Speed and acceleration balls are disjoint (current speed above the cap
    // by more than one step of deceleration): brake as hard as allowed.
    const double l = norm(a.velocity);
    const Vec3 toward = l > 0.0 ? -a.velocity / l : Vec3{};
    return {a.velocity + toward * accel.r, halfspaces.size()};
  }
  // Coverage planes go first, shallowest violation first.
  std::vector<std::size_t> cov;
  std::vector<HalfSpace> hard;
  std::vector<HalfSpace> soft;
  for (std::size_t i = 0; i < halfspaces.size(); ++i) {
    if (halfspaces[i].kind == ConstraintKind::Coverage) {
      cov.push_back(i);
    } else if (halfspaces[i].kind == ConstraintKind::Static) {
      hard.push_back(halfspaces[i]);
    } else {
      soft.push_back(halfspaces[i]);
    }
  }
  std::stable_sort(cov.begin(), cov.end(), [&](std::size_t x, std::size_t y) {
    return -halfspaces[x].margin(*base) < -halfspaces[y].margin(*base);
  });
  std::vector<HalfSpace> kept;
  for (std::size_t k = 0; k < cov.size(); ++k) {
    kept = hard;
    kept.insert(kept.end(), soft.begin(), soft.end());
    for (std::size_t j = k + 1; j < cov.size(); ++j) {
      kept.push_back(halfspaces[cov[j]]);
    }
    if (auto v = solve_exact(a.pref_velocity, kept, speed, accel)) {
      return {*v, k + 1};
    }
  }

  // Collision planes are never ignored outright: the reactive and
  // non-reactive ones are pushed back by the smallest common margin that
  // makes the set feasible, static ones too if they cannot hold on their own.
  std::optional<Vec3> anchor = solve_exact(a.pref_velocity, hard, speed, accel);
  if (!anchor) {
    soft.insert(soft.end(), hard.begin(), hard.end());
    hard.clear();
    anchor = base;
  }
  double hi = 0.0;
  for (const HalfSpace& h : soft) {
    hi = std::max(hi, -h.margin(*anchor));
  }
  auto relaxed = [&](double t) {
    kept = hard;
    for (HalfSpace h : soft) {
      h.point -= h.normal * t;
      kept.push_back(h);
    }
    return solve_exact(a.pref_velocity, kept, speed, accel);
  };
  std::optional<Vec3> best = relaxed(hi);
  if (!best) {
    best = anchor;
  }
  double lo = 0.0;
  for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (auto v = relaxed(mid)) {
      hi = mid;
      best = v;
    } else {
      lo = mid;
    }
  }
  std::size_t given_up = cov.size();
  for (const HalfSpace& h : soft) {
    if (h.margin(*best) < -1e-9) {
      ++given_up;
    }
  }
  return {*best, given_up};
}

}  // namespace

SolveResult solve_velocity_ex(std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt) {
  if (!(dt > 0.0)) {
    throw OutOfRangeError("solve_velocity requires dt > 0");
  }
  SolveResult r = solve_within_tolerance(halfspaces, a, dt);
  // the ball tests accept kEps of slack; the acceleration limit is exact
  const double reach = a.max_accel * dt;
  const Vec3 w = r.v - a.velocity;
  const double d = norm(w);
  if (d > reach) {
    r.v = a.velocity + w * (reach / d);
  }
  return r;
}

Vec3 solve_velocity(std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt) {
  return solve_velocity_ex(halfspaces, a, dt).v;
}

}  // namespace lswarm
