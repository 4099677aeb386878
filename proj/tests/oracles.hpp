// Independent reference computations used by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lswarm/geom3.hpp"
#include "lswarm/orca3d.hpp"

namespace oracle {

using lswarm::Vec3;

/// Closest approach of the straight-line relative motion t·v over [0, tau] to
/// p: dense sampling of t, then ternary refinement in the best bracket.
inline double min_separation(const Vec3& v, const Vec3& p, double tau, int samples = 2000) {
  auto f = [&](double t) { return lswarm::norm(v * t - p); };
  int best = 0;
  double best_d = f(0.0);
  for (int k = 1; k <= samples; ++k) {
    const double d = f(tau * k / samples);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  double lo = tau * std::max(0, best - 1) / samples;
  double hi = tau * std::min(samples, best + 1) / samples;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min(best_d, f(0.5 * (lo + hi)));
}

/// Time-sampled velocity obstacle membership.
inline bool vo_sampled(const Vec3& v, const Vec3& p, double r, double tau, int samples = 2000) {
  return min_separation(v, p, tau, samples) < r;
}

/// Distance from v to the complement of the VO, by ray-exit search over a
/// Fibonacci sphere of directions with bisection on the sampled membership.
inline double distance_to_vo_exit(const Vec3& v, const Vec3& p, double r, double tau, int dirs = 20000) {
  double best = std::numeric_limits<double>::infinity();
  const double golden = lswarm::kPi * (3.0 - std::sqrt(5.0));
  const double reach = lswarm::norm(v) + lswarm::norm(p) / tau + r / tau + 1.0;
  for (int i = 0; i < dirs; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / dirs;
    const double rad = std::sqrt(1.0 - z * z);
    const Vec3 d{std::cos(golden * i) * rad, std::sin(golden * i) * rad, z};
    double lo = 0.0, hi = std::min(best, reach);
    if (vo_sampled(v + d * hi, p, r, tau, 50)) {
      continue;
    }
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (vo_sampled(v + d * mid, p, r, tau, 50) ? lo : hi) = mid;
    }
    best = std::min(best, hi);
  }
  return best;
}

inline bool feasible(const Vec3& v, std::span<const lswarm::HalfSpace> hs, const lswarm::AgentKinematics& a,
                     double dt, double tol = 0.0) {
  if (lswarm::norm(v) > a.max_speed + tol) return false;
  if (lswarm::distance(v, a.velocity) > a.max_accel * dt + tol) return false;
  for (const auto& h : hs) {
    if (h.margin(v) < -tol) return false;
  }
  return true;
}

/// First parameter s >= 0 at which pref + s·u enters the feasible set, or
/// +inf when the ray misses it. Each constraint cuts an exact interval.
inline double ray_entry(const Vec3& pref, const Vec3& u, std::span<const lswarm::HalfSpace> hs,
                        const lswarm::AgentKinematics& a, double dt) {
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  auto ball = [&](const Vec3& c, double r) {
    const Vec3 w = pref - c;
    const double b = lswarm::dot(w, u);
    const double disc = b * b - (lswarm::norm_sq(w) - r * r);
    if (disc < 0) {
      lo = std::numeric_limits<double>::infinity();
      return;
    }
    lo = std::max(lo, -b - std::sqrt(disc));
    hi = std::min(hi, -b + std::sqrt(disc));
  };
  ball({}, a.max_speed);
  ball(a.velocity, a.max_accel * dt);
  for (const auto& h : hs) {
    const double c0 = h.margin(pref);
    const double c1 = lswarm::dot(h.normal, u);
    if (std::abs(c1) < 1e-15) {
      if (c0 < 0) return std::numeric_limits<double>::infinity();
      continue;
    }
    (c1 > 0 ? lo : hi) = c1 > 0 ? std::max(lo, -c0 / c1) : std::min(hi, -c0 / c1);
  }
  return lo <= hi ? lo : std::numeric_limits<double>::infinity();
}

/// Grid search for argmin |v - pref| over the feasible set, done over the
/// sphere of directions around pref: a dense Fibonacci grid, then zooming
/// square grids in the tangent plane of the best direction. The objective for
/// a direction is the exact ray entry distance. Returns false when nothing is
/// feasible.
inline bool grid_argmin(std::span<const lswarm::HalfSpace> hs, const lswarm::AgentKinematics& a, double dt,
                        Vec3& out, int dirs = 4000, int n = 9, int levels = 3000) {
  const Vec3 pref = a.pref_velocity;
  if (feasible(pref, hs, a, dt)) {
    out = pref;
    return true;
  }
  const double golden = lswarm::kPi * (3.0 - std::sqrt(5.0));
  double best = std::numeric_limits<double>::infinity();
  Vec3 bu;
  for (int i = 0; i < dirs; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / dirs;
    const double rad = std::sqrt(1.0 - z * z);
    const Vec3 u{std::cos(golden * i) * rad, std::sin(golden * i) * rad, z};
    const double s = ray_entry(pref, u, hs, a, dt);
    if (s < best) {
      best = s;
      bu = u;
    }
  }
  if (!std::isfinite(best)) return false;
  double half = 4.0 * std::sqrt(4.0 * lswarm::kPi / dirs);
  // The grid is turned by a fixed irrational angle each level so narrow
  // valleys of the entry distance are eventually sampled along their axis.
  double spin = 0.0;
  for (int level = 0; level < levels && half > 1e-15; ++level) {
    Vec3 f1 = lswarm::cross(bu, {0, 0, 1});
    if (lswarm::norm(f1) < 0.5) f1 = lswarm::cross(bu, {1, 0, 0});
    f1 = f1 / lswarm::norm(f1);
    const Vec3 f2 = lswarm::cross(bu, f1);
    spin += golden;
    const Vec3 e1 = f1 * std::cos(spin) + f2 * std::sin(spin);
    const Vec3 e2 = f2 * std::cos(spin) - f1 * std::sin(spin);
    const double step = 2.0 * half / (n - 1);
    bool moved = false;
    Vec3 next = bu;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const Vec3 u = lswarm::normalized(bu + e1 * (-half + i * step) + e2 * (-half + j * step));
        const double s = ray_entry(pref, u, hs, a, dt);
        if (s < best) {
          best = s;
          next = u;
          moved = true;
        }
      }
    }
    bu = next;
    half *= moved ? 1.5 : 0.6;
  }
  out = pref + bu * best;
  return true;
}

/// Projection of pref onto the feasible set by Dykstra's alternating
/// projections. Converges to the exact argmin, independent of any active-set
/// reasoning.
inline Vec3 dykstra_argmin(std::span<const lswarm::HalfSpace> hs, const lswarm::AgentKinematics& a, double dt,
                           int max_sweeps = 2000000) {
  const std::size_t m = hs.size() + 2;
  std::vector<Vec3> inc(m);
  Vec3 x = a.pref_velocity;
  auto project = [&](std::size_t i, const Vec3& y) -> Vec3 {
    if (i < hs.size()) {
      const double g = hs[i].margin(y);
      return g >= 0 ? y : y - hs[i].normal * g;
    }
    const Vec3 c = i == hs.size() ? Vec3{} : a.velocity;
    const double r = i == hs.size() ? a.max_speed : a.max_accel * dt;
    const Vec3 w = y - c;
    const double l = lswarm::norm(w);
    return l <= r ? y : c + w * (r / l);
  };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3 y = project(i, x + inc[i]);
      inc[i] = x + inc[i] - y;
      moved = std::max(moved, lswarm::distance(x, y));
      x = y;
    }
    if (moved < 1e-15) break;
  }
  return x;
}

}  // namespace oracle
