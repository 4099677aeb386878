#include "lswarm/lswarm.hpp"

#include <algorithm>
#include <cmath>

#include "lswarm/errors.hpp"

namespace lswarm {

std::vector<HalfSpace> static_halfspaces(const AgentKinematics& a, const UrbanModel& model, double eps,
                                         double sense_range, double tau, OptVelocity opt, double recover_dt) {
  if (!(eps > 0.0)) {
    throw OutOfRangeError("static obstacle radius eps must be positive");
  }
  std::vector<HalfSpace> out;
  const auto near = model.nearest(a.position);
  if (!near || near->distance > sense_range) {
    return out;
  }
  if (near->distance <= 1e-9) {
    // Centre inside a building: no direction to the surface, climb out.
    if (recover_dt <= 0.0) {
      throw AlreadyCollidingError("agent centre is inside a building");
    }
    const double top = model.buildings()[near->building].max.z;
    const double climb = std::min(a.max_speed, (top + a.radius + eps - a.position.z) / recover_dt);
    out.push_back({{0.0, 0.0, climb}, {0.0, 0.0, 1.0}, ConstraintKind::Static});
    return out;
  }
  out.push_back(halfspace_nonreactive(a, near->point, {}, eps, tau, opt, recover_dt, ConstraintKind::Static));
  return out;
}

PathProgress::PathProgress(std::vector<Vec3> wps, double path_tol, double arrive_tol)
    : waypoints(std::move(wps)), path_tolerance(path_tol), arrival_tolerance(arrive_tol) {
  if (waypoints.size() < 2) {
    throw ValidationError("a path needs at least two waypoints");
  }
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (distance(waypoints[i], waypoints[i - 1]) <= 1e-9) {
      throw ValidationError("waypoints " + std::to_string(i - 1) + " and " + std::to_string(i) + " coincide",
                            static_cast<long>(i));
    }
  }
}

namespace {

void advance(const Vec3& p, PathProgress& prog) {
  while (!prog.done() && distance(p, prog.next_wp()) <= prog.arrival_tolerance) {
    ++prog.next;
  }
}

Vec3 toward(const Vec3& p, const Vec3& target, double cruise, double dt, bool last) {
  const Vec3 d = target - p;
  const double l = norm(d);
  if (l <= 1e-12) {
    return {};
  }
  const double speed = last ? std::min(cruise, l / dt) : cruise;
  return d * (speed / l);
}

}  // namespace

Vec3 preferred_velocity(const Vec3& position, PathProgress& prog, double cruise, double dt) {
  advance(position, prog);
  if (prog.done()) {
    prog.on_path = true;
    return {};
  }
  const Vec3 cp = closest_point_segment(position, prog.prev_wp(), prog.next_wp());
  const double off = distance(position, cp);
  prog.on_path = off <= prog.path_tolerance;
  const bool last = prog.next + 1 == prog.waypoints.size();
  if (prog.on_path) {
    return toward(position, prog.next_wp(), cruise, dt, last);
  }
  return toward(position, cp, cruise, dt, false);
}

Vec3 waypoint_velocity(const Vec3& position, PathProgress& prog, double cruise, double dt) {
  advance(position, prog);
  if (prog.done()) {
    return {};
  }
  prog.on_path = distance(position, closest_point_segment(position, prog.prev_wp(), prog.next_wp())) <=
                 prog.path_tolerance;
  return toward(position, prog.next_wp(), cruise, dt, prog.next + 1 == prog.waypoints.size());
}

bool altitude_ok(double h, double vz, double tau, double floor, double ceiling) {
  // Linear in t, so the two ends of the horizon bound every sample. An agent
  // already outside the band may not move further out.
  const double end = h + vz * tau;
  return end <= std::max(ceiling, h) + 1e-9 && end >= std::min(floor, h) - 1e-9;
}

SelectResult select_velocity(const LookupTable& lut, const Vec3& v_pref, const Vec3& v_orca,
                             std::span<const HalfSpace> halfspaces, const AgentKinematics& a, double dt,
                             const SelectParams& p) {
  SelectResult out;
  out.v = v_orca;
  const double s = norm(v_pref);
  if (s <= 1e-9 || lut.size() == 0) {
    return out;
  }
  const RotMat R = align_x_to(v_pref);
  const RotMat Rt = R.transposed();
  out.nearest_row = lut.nearest(norm(v_orca) > 1e-9 ? Rt * v_orca : Vec3{-1.0, 0.0, 0.0});
  const double delta = distance(v_pref, v_orca);
  if (delta <= 1e-9 * std::max(1.0, s)) {
    return out;
  }
  if (s > a.max_speed + 1e-9) {
    return out;
  }
  const double eps = p.eps_sel >= 0.0 ? p.eps_sel : 0.05 * s;
  const double min_dev = (delta + eps) / s;
  const double o_ref = lut.entries()[out.nearest_row].overlap;

  // Only directions reachable within the acceleration ball can pass, so the
  // ranked scan is restricted to the rows of yaw that can reach it.
  const Vec3 c = (Rt * a.velocity) / s;
  const double rho = a.max_accel * dt / s;
  const double cl = norm(c);
  const double tol = 1e-12;
  int lo = 0;
  int hi = lut.per_axis() - 1;
  if (cl > 1e-12) {
    const double cos_psi = (1.0 + cl * cl - (rho + tol) * (rho + tol)) / (2.0 * cl);
    if (cos_psi > 1.0) {
      return out;
    }
    if (cos_psi > -1.0) {
      const double psi = rad2deg(std::acos(cos_psi));
      const double alpha_c = rad2deg(std::asin(std::clamp(c.y / cl, -1.0, 1.0)));
      const double step = lut.header().step_deg;
      lo = std::max(lo, static_cast<int>(std::floor((alpha_c - psi + 90.0) / step)) - 1);
      hi = std::min(hi, static_cast<int>(std::ceil((alpha_c + psi + 90.0) / step)) + 1);
    }
  } else if (rho + tol < 1.0) {
    return out;
  }

  std::vector<std::uint32_t> cand;
  const int n = lut.per_axis();
  for (int ia = lo; ia <= hi; ++ia) {
    for (int ib = 0; ib < n; ++ib) {
      const std::uint32_t k = static_cast<std::uint32_t>(ia * n + ib);
      const LutEntry& e = lut.entries()[k];
      if (e.deviation < min_dev || e.overlap < o_ref) continue;
      if (norm_sq(e.v - c) > (rho + tol) * (rho + tol)) continue;
      const Vec3 v = (R * e.v) * s;
      if (!altitude_ok(a.position.z, v.z, p.tau, p.floor, p.ceiling)) continue;
      cand.push_back(k);
    }
  }
  std::sort(cand.begin(), cand.end(),
            [&](std::uint32_t i, std::uint32_t j) { return lut.rank()[i] < lut.rank()[j]; });

  // Half-spaces v_orca satisfies must hold; those it only approaches (the
  // solver relaxed them) may not be violated any further.
  std::vector<std::pair<const HalfSpace*, double>> active;
  for (const HalfSpace& h : halfspaces) {
    active.emplace_back(&h, std::min(0.0, h.margin(v_orca)) - 1e-9);
  }
  const double amax = a.max_accel * dt;
  for (std::uint32_t k : cand) {
    if (out.tested >= p.candidate_cap) break;
    const Vec3 v = (R * lut.entries()[k].v) * s;
    // exact ball checks in world units
    if (norm(v) > a.max_speed + 1e-9 || distance(v, a.velocity) > amax) continue;
    ++out.tested;
    bool ok = true;
    for (const auto& [h, floor] : active) {
      if (h->margin(v) < floor) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.v = v;
      out.fallback = false;
      out.row = k;
      return out;
    }
  }
  return out;
}

double resolution_ceiling(const CameraModel& cam, const PathProgress& prog) {
  double c = optimal_altitude(cam);
  if (!prog.done()) {
    c = std::max({c, prog.prev_wp().z, prog.next_wp().z});
  } else if (!prog.waypoints.empty()) {
    c = std::max(c, prog.goal().z);
  }
  return c;
}

StepOutput agent_step(AgentKinematics& a, PathProgress& prog, AgentMemory& mem,
                      std::span<const Observation> seen, const UrbanModel& model, const LookupTable* lut,
                      const CameraModel& cam, const AgentConfig& cfg) {
  const bool ls = cfg.mode == AvoidMode::LSwarm;
  StepOutput out;
  a.pref_velocity = ls ? preferred_velocity(a.position, prog, cfg.cruise, cfg.dt)
                       : waypoint_velocity(a.position, prog, cfg.cruise, cfg.dt);
  out.v_pref = a.pref_velocity;

  std::vector<HalfSpace> hs;
  hs.reserve(seen.size() + 3);
  const bool track = ls && cfg.use_kalman;
  for (const Observation& o : seen) {
    Vec3 pos = o.position;
    Vec3 vel = o.velocity;
    double r = o.radius;
    if (track) {
      KalmanTracker& tr = mem.trackers.try_emplace(o.id, cfg.kalman).first->second;
      kalman_step(tr, std::make_pair(o.position, o.velocity), cfg.dt);
      pos = tracked_position(tr);
      vel = tracked_velocity(tr);
      r = inflated_radius(o.radius, tr.covariance());
    }
    r += cfg.avoid_margin;
    if (o.reactive) {
      AgentKinematics b;
      b.position = pos;
      b.velocity = vel;
      b.pref_velocity = vel;
      b.radius = r;
      hs.push_back(halfspace_reactive(a, b, cfg.tau, cfg.opt, cfg.dt));
    } else {
      hs.push_back(halfspace_nonreactive(a, pos, vel, r, cfg.tau, cfg.opt, cfg.dt));
    }
  }
  if (track) {
    // forget whatever left the sensing range
    for (auto it = mem.trackers.begin(); it != mem.trackers.end();) {
      const bool present =
          std::any_of(seen.begin(), seen.end(), [&](const Observation& o) { return o.id == it->first; });
      it = present ? std::next(it) : mem.trackers.erase(it);
    }
  }
  if (ls) {
    for (const HalfSpace& h : static_halfspaces(a, model, cfg.static_eps, cfg.static_range, cfg.tau_static,
                                                cfg.opt, cfg.dt)) {
      hs.push_back(h);
    }
    out.ceiling = resolution_ceiling(cam, prog);
    const double h = a.position.z;
    // outside the band: back within one step, like a collision recovery
    // but no faster than one step of acceleration can turn
    const double reach = a.max_accel * cfg.dt;
    const double vz_hi = h > out.ceiling ? std::max((out.ceiling - h) / cfg.dt, a.velocity.z - reach)
                                         : (out.ceiling - h) / cfg.select.tau;
    const double vz_lo = h < cfg.floor ? std::min((cfg.floor - h) / cfg.dt, a.velocity.z + reach)
                                       : (cfg.floor - h) / cfg.select.tau;
    hs.push_back({{0.0, 0.0, vz_hi}, {0.0, 0.0, -1.0}, ConstraintKind::Coverage});
    hs.push_back({{0.0, 0.0, vz_lo}, {0.0, 0.0, 1.0}, ConstraintKind::Coverage});
  }
  out.halfspaces = hs.size();

  const SolveResult sr = solve_velocity_ex(hs, a, cfg.dt);
  out.v_orca = sr.v;
  out.dropped = sr.dropped;
  out.v = sr.v;
  if (ls && lut != nullptr) {
    SelectParams sp = cfg.select;
    // a swap may never trade resolution away, even where the plan flies high
    sp.ceiling = optimal_altitude(cam);
    sp.floor = cfg.floor;
    const SelectResult sel = select_velocity(*lut, a.pref_velocity, sr.v, hs, a, cfg.dt, sp);
    out.v = sel.v;
    out.selected = !sel.fallback;
    out.orca_row = sel.nearest_row;
    out.lut_row = sel.row.value_or(sel.nearest_row);
  }
  return out;
}

}  // namespace lswarm
