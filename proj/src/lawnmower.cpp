#include "lswarm/lawnmower.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstdio>

#include "lswarm/errors.hpp"

namespace lswarm {

namespace {

// A waypoint and the sweep row it belongs to. Transit points between rows
// carry the destination row.
struct Tagged {
  Vec3 p;
  int row = 0;
};

// Plan-frame helpers: u runs along the rows, w across them.
struct Frame {
  bool rows_along_x = true;
  double along = 0.0;   // row length
  double across = 0.0;  // extent rows are stacked over

  Vec3 world(double u, double w, double z) const {
    return rows_along_x ? Vec3{u, w, z} : Vec3{w, u, z};
  }
  Rect2 rect(double u0, double u1, double w0, double w1) const {
    return rows_along_x ? Rect2{{u0, w0}, {u1, w1}} : Rect2{{w0, u0}, {w1, u1}};
  }
};

std::vector<double> centers(double extent, double spacing, double side) {
  const long n = std::max(1L, static_cast<long>(std::ceil(extent / spacing - 1e-9)));
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(n));
  const double lo = std::min(side / 2.0, extent / 2.0);
  const double hi = std::max(extent - side / 2.0, extent / 2.0);
  if (n == 1 || hi - lo <= 1e-9) {
    c.push_back((lo + hi) / 2.0);
    return c;
  }
  // evenly between the edge rows, never wider than the requested spacing
  const long k = std::max(n, static_cast<long>(std::ceil((hi - lo) / spacing - 1e-9)) + 1);
  for (long i = 0; i < k; ++i) {
    c.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
  }
  return c;
}

bool collinear(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 bc = c - b;
  return norm(cross(ab, bc)) <= 1e-9 * std::max(1.0, norm(ab) * norm(bc)) && dot(ab, bc) > 0.0;
}

void push(std::vector<Tagged>& out, const Vec3& p, int row) {
  if (!out.empty() && distance(out.back().p, p) <= 1e-9) {
    return;
  }
  // Drop the middle of three collinear points inside one row.
  if (out.size() >= 2 && out.back().row == row && out[out.size() - 2].row == row &&
      collinear(out[out.size() - 2].p, out.back().p, p)) {
    out.back().p = p;
    return;
  }
  out.push_back({p, row});
}

double polyline_length(const std::vector<Vec3>& pts) {
  double l = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    l += distance(pts[i - 1], pts[i]);
  }
  return l;
}

// Splits the longest unit at its length midpoint; both halves share that point.
void split_longest(std::vector<std::vector<Vec3>>& units) {
  std::size_t best = 0;
  double best_len = -1.0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const double l = polyline_length(units[i]);
    if (l > best_len) {
      best_len = l;
      best = i;
    }
  }
  const std::vector<Vec3> u = units[best];
  std::vector<Vec3> first, second;
  if (u.size() < 2 || best_len <= 0.0) {
    first = u;
    second = {u.back()};
  } else {
    const double half = best_len / 2.0;
    double acc = 0.0;
    std::size_t k = 1;
    first.push_back(u[0]);
    for (; k < u.size(); ++k) {
      const double seg = distance(u[k - 1], u[k]);
      if (acc + seg >= half) {
        break;
      }
      acc += seg;
      first.push_back(u[k]);
    }
    const double seg = distance(u[k - 1], u[k]);
    const double t = seg > 0.0 ? (half - acc) / seg : 0.0;
    const Vec3 mid = u[k - 1] + (u[k] - u[k - 1]) * t;
    if (distance(first.back(), mid) > 1e-9) {
      first.push_back(mid);
    }
    second.push_back(mid);
    for (; k < u.size(); ++k) {
      if (distance(second.back(), u[k]) > 1e-9) {
        second.push_back(u[k]);
      }
    }
  }
  units[best] = std::move(first);
  units.insert(units.begin() + static_cast<long>(best) + 1, std::move(second));
}

}  // namespace

void PlanConfig::validate() const {
  if (!(clearance > 0.0)) {
    throw ValidationError("clearance must be positive");
  }
  if (!(row_factor > 0.0)) {
    throw ValidationError("row spacing factor must be positive");
  }
  if (agents < 1) {
    throw ValidationError("at least one agent is required");
  }
  if (!(agent_radius > 0.0) || margin < 0.0) {
    throw ValidationError("agent radius must be positive and margin non-negative");
  }
}

double WaypointPath::length() const { return polyline_length(waypoints); }

std::vector<WaypointPath> plan(const UrbanModel& model, const CameraModel& cam, const PlanConfig& cfg) {
  cfg.validate();
  cam.validate();
  const double h_star = optimal_altitude(cam);
  const double tallest = model.max_height();
  if (tallest > 0.0 && tallest + cfg.clearance > cam.sensing_range) {
    throw InfeasibleAltitudeError("building height " + std::to_string(tallest) + " m plus clearance " +
                                  std::to_string(cfg.clearance) + " m exceeds sensing range " +
                                  std::to_string(cam.sensing_range) + " m");
  }
  const double side = footprint_side(h_star, cam);
  if (!(side > 0.0)) {
    throw ValidationError("footprint side at the optimal altitude is zero");
  }
  const double spacing = cfg.row_factor * side;
  const OccupancyGrid grid = build_occupancy(model, side);
  const double keep = cfg.agent_radius + cfg.margin;

  Frame f;
  f.rows_along_x = model.width() >= model.length();
  f.along = f.rows_along_x ? model.width() : model.length();
  f.across = f.rows_along_x ? model.length() : model.width();

  const std::vector<double> row_w = centers(f.across, spacing, side);
  const std::vector<double> cell_u = centers(f.along, side, side);

  auto required = [&](double h_obst) { return h_obst > 0.0 ? std::max(h_star, h_obst + cfg.clearance) : h_star; };

  // Required altitude per (row, cell).
  std::vector<std::vector<double>> alt(row_w.size(), std::vector<double>(cell_u.size(), h_star));
  for (std::size_t r = 0; r < row_w.size(); ++r) {
    for (std::size_t c = 0; c < cell_u.size(); ++c) {
      const double u0 = c == 0 ? cell_u[c] : (cell_u[c - 1] + cell_u[c]) / 2.0;
      const double u1 = c + 1 == cell_u.size() ? cell_u[c] : (cell_u[c] + cell_u[c + 1]) / 2.0;
      const Rect2 area = f.rect(u0 - keep, u1 + keep, row_w[r] - keep, row_w[r] + keep);
      alt[r][c] = required(grid.max_height_in(area));
    }
  }

  std::vector<Tagged> full;
  for (std::size_t r = 0; r < row_w.size(); ++r) {
    const int row = static_cast<int>(r);
    const bool forward = r % 2 == 0;
    const std::size_t n = cell_u.size();
    auto cell_at = [&](std::size_t k) { return forward ? k : n - 1 - k; };
    const double w = row_w[r];

    if (r > 0) {
      // Turn from the end of the previous row, flown at the highest altitude
      // needed anywhere along the connecting strip.
      const Vec3 from = full.back().p;
      const double u = cell_u[cell_at(0)];
      const Rect2 strip = f.rect(u - keep, u + keep, std::min(row_w[r - 1], w) - keep,
                                 std::max(row_w[r - 1], w) + keep);
      const double z_turn = std::max({from.z, alt[r][cell_at(0)], required(grid.max_height_in(strip))});
      push(full, f.world(u, row_w[r - 1], z_turn), row);
      push(full, f.world(u, w, z_turn), row);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t c = cell_at(k);
      const Vec3 here = f.world(cell_u[c], w, alt[r][c]);
      if (!full.empty() && full.back().row == row) {
        const Vec3 prev = full.back().p;
        if (here.z > prev.z) {
          push(full, {prev.x, prev.y, here.z}, row);  // climb before moving
        } else if (here.z < prev.z) {
          push(full, {here.x, here.y, prev.z}, row);  // descend after moving
        }
      }
      push(full, here, row);
    }
  }

  // Units are rows; split the longest until every agent has one.
  std::vector<std::vector<Vec3>> units;
  for (const Tagged& t : full) {
    if (units.empty() || static_cast<int>(units.size()) <= t.row) {
      units.emplace_back();
    }
    units.back().push_back(t.p);
  }
  while (static_cast<int>(units.size()) < cfg.agents) {
    split_longest(units);
  }

  // Contiguous blocks with near-equal cumulative length.
  std::vector<double> cum(units.size() + 1, 0.0);
  for (std::size_t i = 0; i < units.size(); ++i) {
    double l = polyline_length(units[i]);
    if (i > 0) {
      l += distance(units[i - 1].back(), units[i].front());
    }
    cum[i + 1] = cum[i] + l;
  }
  const std::size_t n_units = units.size();
  const auto agents = static_cast<std::size_t>(cfg.agents);
  std::vector<std::size_t> cut(agents + 1, 0);
  cut[agents] = n_units;
  for (std::size_t a = 1; a < agents; ++a) {
    const double target = cum[n_units] * static_cast<double>(a) / static_cast<double>(agents);
    std::size_t best = cut[a - 1] + 1;
    for (std::size_t i = cut[a - 1] + 1; i + (agents - a) <= n_units; ++i) {
      if (std::abs(cum[i] - target) < std::abs(cum[best] - target)) {
        best = i;
      }
    }
    cut[a] = best;
  }

  std::vector<WaypointPath> paths(agents);
  for (std::size_t a = 0; a < agents; ++a) {
    paths[a].agent = static_cast<int>(a);
    for (std::size_t i = cut[a]; i < cut[a + 1]; ++i) {
      for (const Vec3& p : units[i]) {
        if (paths[a].waypoints.empty() || distance(paths[a].waypoints.back(), p) > 1e-9) {
          paths[a].waypoints.push_back(p);
        }
      }
    }
  }
  return paths;
}

double verify_coverage(const std::vector<WaypointPath>& paths, const UrbanModel& model,
                       const CameraModel& cam, double cell) {
  const double h_star = optimal_altitude(cam);
  if (!(cell > 0.0)) {
    cell = footprint_side(h_star, cam) / 10.0;
  }
  const long nx = std::max(1L, static_cast<long>(std::ceil(model.width() / cell)));
  const long ny = std::max(1L, static_cast<long>(std::ceil(model.length() / cell)));
  const double cx = model.width() / static_cast<double>(nx);
  const double cy = model.length() / static_cast<double>(ny);

  // 0 = building, 1 = free and unseen, 2 = seen
  std::vector<std::uint8_t> state(static_cast<std::size_t>(nx * ny), 1);
  for (long j = 0; j < ny; ++j) {
    for (long i = 0; i < nx; ++i) {
      const double x = (static_cast<double>(i) + 0.5) * cx;
      const double y = (static_cast<double>(j) + 0.5) * cy;
      if (model.building_at(x, y)) {
        state[static_cast<std::size_t>(j * nx + i)] = 0;
      }
    }
  }
  const long free_cells = std::count(state.begin(), state.end(), 1);
  if (free_cells == 0) {
    return 0.0;
  }

  auto stamp = [&](const Vec3& p) {
    if (p.z < 0.0 || p.z > cam.sensing_range) {
      return;
    }
    const double half = footprint_side(p.z, cam) / 2.0 + 1e-9;
    const long i0 = std::max(0L, static_cast<long>(std::floor((p.x - half) / cx)));
    const long i1 = std::min(nx - 1, static_cast<long>(std::floor((p.x + half) / cx)));
    const long j0 = std::max(0L, static_cast<long>(std::floor((p.y - half) / cy)));
    const long j1 = std::min(ny - 1, static_cast<long>(std::floor((p.y + half) / cy)));
    for (long j = j0; j <= j1; ++j) {
      const double y = (static_cast<double>(j) + 0.5) * cy;
      if (std::abs(y - p.y) > half) {
        continue;
      }
      for (long i = i0; i <= i1; ++i) {
        const double x = (static_cast<double>(i) + 0.5) * cx;
        auto& s = state[static_cast<std::size_t>(j * nx + i)];
        if (s == 1 && std::abs(x - p.x) <= half) {
          s = 2;
        }
      }
    }
  };

  const double step = std::max(cell / 2.0, 1e-3);
  for (const WaypointPath& path : paths) {
    const auto& w = path.waypoints;
    if (w.size() == 1) {
      stamp(w[0]);
    }
    for (std::size_t k = 1; k < w.size(); ++k) {
      const double len = distance(w[k - 1], w[k]);
      const long n = std::max(1L, static_cast<long>(std::ceil(len / step)));
      for (long s = 0; s <= n; ++s) {
        stamp(w[k - 1] + (w[k] - w[k - 1]) * (static_cast<double>(s) / static_cast<double>(n)));
      }
    }
  }
  const long unseen = std::count(state.begin(), state.end(), 1);
  return static_cast<double>(unseen) / static_cast<double>(free_cells);
}

void write_waypoints(const std::vector<WaypointPath>& paths, const std::filesystem::path& out) {
  std::ofstream os(out);
  if (!os) {
    throw Error("cannot write " + out.string());
  }
  os << "agent,index,x,y,z\n";
  char buf[160];
  for (const WaypointPath& p : paths) {
    for (std::size_t i = 0; i < p.waypoints.size(); ++i) {
      const Vec3& w = p.waypoints[i];
      std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g\n", p.agent, i, w.x, w.y, w.z);
      os << buf;
    }
  }
}

std::vector<WaypointPath> read_waypoints(const std::filesystem::path& in) {
  std::ifstream is(in);
  if (!is) {
    throw ParseError("cannot open waypoint file " + in.string());
  }
  std::string line;
  std::getline(is, line);
  if (line != "agent,index,x,y,z") {
    throw ParseError("unexpected waypoint header in " + in.string());
  }
  std::vector<WaypointPath> paths;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    int agent = 0;
    std::size_t index = 0;
    Vec3 p;
    if (std::sscanf(line.c_str(), "%d,%zu,%lf,%lf,%lf", &agent, &index, &p.x, &p.y, &p.z) != 5 ||
        agent < 0) {
      throw ParseError("bad waypoint row at line " + std::to_string(lineno));
    }
    if (paths.empty() || paths.back().agent != agent) {
      paths.push_back({agent, {}});
    }
    if (paths.back().waypoints.size() != index) {
      throw ParseError("waypoint index out of order at line " + std::to_string(lineno));
    }
    paths.back().waypoints.push_back(p);
  }
  return paths;
}

}  // namespace lswarm
