#include "lswarm/geom3.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "lswarm/errors.hpp"

namespace lswarm {

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (n <= 1e-12) {
    throw ZeroVectorError("cannot normalise a zero-length vector");
  }
  return a / n;
}

RotMat RotMat::operator*(const RotMat& o) const {
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) {
        s += (*this)(i, k) * o(k, j);
      }
      r[i * 3 + j] = s;
    }
  }
  return RotMat(r);
}

RotMat RotMat::transposed() const {
  const auto& m = m_;
  return RotMat({m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]});
}

double RotMat::determinant() const {
  const auto& m = m_;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

RotMat rot_z(double alpha_deg) {
  const double a = deg2rad(alpha_deg);
  const double c = std::cos(a);
  const double s = std::sin(a);
  return RotMat({c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0});
}

RotMat rot_y(double beta_deg) {
  const double b = deg2rad(beta_deg);
  const double c = std::cos(b);
  const double s = std::sin(b);
  return RotMat({c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c});
}

Heading heading_of(const Vec3& v) {
  const double horizontal = std::hypot(v.x, v.y);
  Heading h;
  h.yaw_deg = horizontal > 0.0 ? rad2deg(std::atan2(v.y, v.x)) : 0.0;
  h.pitch_deg = rad2deg(std::atan2(-v.z, horizontal));
  return h;
}

RotMat align_x_to(const Vec3& v) {
  if (norm(v) <= 1e-9) {
    throw ZeroVectorError("align_x_to: heading undefined for a zero vector");
  }
  const Heading h = heading_of(v);
  return rot_z(h.yaw_deg) * rot_y(h.pitch_deg);
}

ClosestPoint closest_point_box(const Vec3& p, const Box3& b) {
  const Vec3 q{std::clamp(p.x, b.min.x, b.max.x), std::clamp(p.y, b.min.y, b.max.y),
               std::clamp(p.z, b.min.z, b.max.z)};
  return {q, distance(p, q)};
}

Vec3 closest_point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len_sq = norm_sq(ab);
  if (len_sq <= 0.0) {
    return a;
  }
  const double t = std::clamp(dot(p - a, ab) / len_sq, 0.0, 1.0);
  return a + ab * t;
}

Rect2 intersect(const Rect2& a, const Rect2& b) {
  return {{std::max(a.min.x, b.min.x), std::max(a.min.y, b.min.y)},
          {std::min(a.max.x, b.max.x), std::min(a.max.y, b.max.y)}};
}

double signed_area(std::span<const Vec2> v) {
  double s = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    s += cross(v[i], v[(i + 1) % n]);
  }
  return 0.5 * s;
}

namespace {

Rect2 bounds_of(std::span<const Vec2> v) {
  Rect2 r{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
          {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
  for (const Vec2& p : v) {
    r.min.x = std::min(r.min.x, p.x);
    r.min.y = std::min(r.min.y, p.y);
    r.max.x = std::max(r.max.x, p.x);
    r.max.y = std::max(r.max.y, p.y);
  }
  return r;
}

bool boxes_overlap(const Rect2& a, const Rect2& b, double slack = 0.0) {
  return a.min.x <= b.max.x + slack && b.min.x <= a.max.x + slack && a.min.y <= b.max.y + slack &&
         b.min.y <= a.max.y + slack;
}

// Drops repeated and collinear vertices left behind by clipping.
std::vector<Vec2> simplify(std::vector<Vec2> v) {
  constexpr double kEps = 1e-12;
  bool changed = true;
  while (changed && v.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < v.size() && v.size() >= 3; ++i) {
      const Vec2& prev = v[(i + v.size() - 1) % v.size()];
      const Vec2& cur = v[i];
      const Vec2& next = v[(i + 1) % v.size()];
      const Vec2 d1 = cur - prev;
      const Vec2 d2 = next - cur;
      const double scale = std::max({std::abs(d1.x), std::abs(d1.y), std::abs(d2.x), std::abs(d2.y), 1.0});
      if ((std::abs(d1.x) <= kEps && std::abs(d1.y) <= kEps) ||
          std::abs(cross(d1, d2)) <= kEps * scale * scale) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (v.size() < 3) {
    v.clear();
  }
  return v;
}

struct SegmentClip {
  double t0 = 0.0;
  double t1 = 1.0;
  bool on_boundary = false;
  bool same_direction = false;
};

// Portion of segment p->q inside the closed convex polygon `poly`.
bool clip_segment(const Vec2& p, const Vec2& q, const Poly2& poly, SegmentClip& out) {
  constexpr double kEps = 1e-9;
  const auto& v = poly.vertices();
  out = SegmentClip{};
  for (std::size_t k = 0, n = v.size(); k < n; ++k) {
    const Vec2& a = v[k];
    const Vec2& b = v[(k + 1) % n];
    const Vec2 e = b - a;
    const double len = std::hypot(e.x, e.y);
    const double dp = cross(e, p - a) / len;
    const double dq = cross(e, q - a) / len;
    if (std::abs(dp) <= kEps && std::abs(dq) <= kEps) {
      out.on_boundary = true;
      out.same_direction = dot(q - p, e) > 0.0;
      continue;
    }
    if (dp < -kEps && dq < -kEps) {
      return false;
    }
    if (dp >= -kEps && dq >= -kEps) {
      continue;
    }
    const double t = std::clamp(dp / (dp - dq), 0.0, 1.0);
    if (dq < dp) {
      out.t1 = std::min(out.t1, t);
    } else {
      out.t0 = std::max(out.t0, t);
    }
    if (out.t0 >= out.t1) {
      return false;
    }
  }
  return out.t1 - out.t0 > 1e-12;
}

double union_area_impl(std::span<const Poly2* const> polys) {
  double area = 0.0;
  std::vector<std::pair<double, double>> removed;
  for (std::size_t i = 0; i < polys.size(); ++i) {
    const auto& v = polys[i]->vertices();
    for (std::size_t k = 0, n = v.size(); k < n; ++k) {
      const Vec2& p = v[k];
      const Vec2& q = v[(k + 1) % n];
      const Rect2 seg_box{{std::min(p.x, q.x), std::min(p.y, q.y)},
                          {std::max(p.x, q.x), std::max(p.y, q.y)}};
      removed.clear();
      for (std::size_t j = 0; j < polys.size(); ++j) {
        if (j == i || !boxes_overlap(seg_box, polys[j]->bounds(), 1e-9)) {
          continue;
        }
        SegmentClip c;
        if (!clip_segment(p, q, *polys[j], c)) {
          continue;
        }
        if (c.on_boundary) {
          // Coincident edges: keep one copy when the polygons lie on the same
          // side, keep both (they cancel) when they lie on opposite sides.
          if (c.same_direction && j < i) {
            removed.emplace_back(c.t0, c.t1);
          }
        } else {
          removed.emplace_back(c.t0, c.t1);
        }
      }
      std::sort(removed.begin(), removed.end());
      double cursor = 0.0;
      const Vec2 d = q - p;
      auto emit = [&](double ta, double tb) {
        if (tb > ta) {
          area += 0.5 * cross(p + d * ta, p + d * tb);
        }
      };
      for (const auto& [a, b] : removed) {
        if (a > cursor) {
          emit(cursor, a);
        }
        cursor = std::max(cursor, b);
      }
      emit(cursor, 1.0);
    }
  }
  return area;
}

void require_valid(std::span<const Poly2> polys) {
  for (const Poly2& p : polys) {
    if (p.size() < 3) {
      throw DegeneratePolygonError("polygon with fewer than 3 vertices");
    }
  }
}

}  // namespace

Poly2::Poly2(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) {
    throw DegeneratePolygonError("polygon needs at least 3 vertices, got " +
                                 std::to_string(vertices_.size()));
  }
  if (signed_area(vertices_) < 0.0) {
    std::reverse(vertices_.begin(), vertices_.end());
  }
  bounds_ = bounds_of(vertices_);
}

Poly2 Poly2::square(Vec2 c, double side) {
  const double h = 0.5 * side;
  return Poly2({{c.x - h, c.y - h}, {c.x + h, c.y - h}, {c.x + h, c.y + h}, {c.x - h, c.y + h}});
}

Poly2 Poly2::rect(const Rect2& r) {
  return Poly2({r.min, {r.max.x, r.min.y}, r.max, {r.min.x, r.max.y}});
}

double Poly2::area() const { return signed_area(vertices_); }

std::vector<Vec2> clip_convex(const Poly2& subject, const Poly2& clip) {
  std::vector<Vec2> out = subject.vertices();
  const auto& c = clip.vertices();
  std::vector<Vec2> in;
  for (std::size_t k = 0, n = c.size(); k < n && !out.empty(); ++k) {
    const Vec2& a = c[k];
    const Vec2 e = c[(k + 1) % n] - a;
    in.swap(out);
    out.clear();
    for (std::size_t i = 0, m = in.size(); i < m; ++i) {
      const Vec2& s = in[i];
      const Vec2& t = in[(i + 1) % m];
      const double ds = cross(e, s - a);
      const double dt = cross(e, t - a);
      if (ds >= 0.0) {
        out.push_back(s);
      }
      if ((ds >= 0.0) != (dt >= 0.0)) {
        const double u = ds / (ds - dt);
        out.push_back(s + (t - s) * u);
      }
    }
  }
  return simplify(std::move(out));
}

double union_area(std::span<const Poly2> polys) {
  require_valid(polys);
  std::vector<const Poly2*> ptrs;
  ptrs.reserve(polys.size());
  for (const Poly2& p : polys) {
    ptrs.push_back(&p);
  }
  return union_area_impl(ptrs);
}

double intersection_area(std::span<const Poly2> set_a, std::span<const Poly2> set_b) {
  require_valid(set_a);
  require_valid(set_b);
  std::vector<Poly2> pieces;
  for (const Poly2& a : set_a) {
    for (const Poly2& b : set_b) {
      if (!boxes_overlap(a.bounds(), b.bounds())) {
        continue;
      }
      auto clipped = clip_convex(a, b);
      if (clipped.size() >= 3 && std::abs(signed_area(clipped)) > 1e-14) {
        pieces.emplace_back(std::move(clipped));
      }
    }
  }
  return union_area(pieces);
}

double intersection_area_by_unions(std::span<const Poly2> set_a, double union_a_area,
                                   std::span<const Poly2> set_b) {
  require_valid(set_b);
  std::vector<const Poly2*> both;
  both.reserve(set_a.size() + set_b.size());
  std::vector<const Poly2*> only_b;
  only_b.reserve(set_b.size());
  for (const Poly2& p : set_a) {
    both.push_back(&p);
  }
  for (const Poly2& p : set_b) {
    both.push_back(&p);
    only_b.push_back(&p);
  }
  const double area_b = union_area_impl(only_b);
  const double area_ab = union_area_impl(both);
  return std::max(0.0, union_a_area + area_b - area_ab);
}

double intersection_area_by_unions(std::span<const Poly2> set_a, std::span<const Poly2> set_b) {
  return intersection_area_by_unions(set_a, union_area(set_a), set_b);
}

namespace {

struct Grid {
  Rect2 region;
  long nx = 0;
  long ny = 0;
  double cx = 0.0;
  double cy = 0.0;
};

Rect2 union_bounds(std::span<const Poly2> polys) {
  Rect2 r{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
          {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
  for (const Poly2& p : polys) {
    r.min.x = std::min(r.min.x, p.bounds().min.x);
    r.min.y = std::min(r.min.y, p.bounds().min.y);
    r.max.x = std::max(r.max.x, p.bounds().max.x);
    r.max.y = std::max(r.max.y, p.bounds().max.y);
  }
  return r;
}

Grid make_grid(const Rect2& region, double cell) {
  Grid g;
  g.region = region;
  const double w = region.max.x - region.min.x;
  const double h = region.max.y - region.min.y;
  g.nx = std::max(1L, static_cast<long>(std::ceil(w / cell - 1e-9)));
  g.ny = std::max(1L, static_cast<long>(std::ceil(h / cell - 1e-9)));
  g.cx = w / static_cast<double>(g.nx);
  g.cy = h / static_cast<double>(g.ny);
  return g;
}

// Calls fn(linear_index) for every grid cell whose centre lies in the closed polygon.
template <typename Fn>
void scan_polygon(const Grid& g, const Poly2& poly, Fn&& fn) {
  constexpr double kEps = 1e-12;
  const Rect2& pb = poly.bounds();
  const long j0 = std::max(0L, static_cast<long>(std::floor((pb.min.y - g.region.min.y) / g.cy - 0.5)));
  const long j1 = std::min(g.ny - 1, static_cast<long>(std::ceil((pb.max.y - g.region.min.y) / g.cy - 0.5)));
  const auto& v = poly.vertices();
  for (long j = j0; j <= j1; ++j) {
    const double yc = g.region.min.y + (static_cast<double>(j) + 0.5) * g.cy;
    double xl = std::numeric_limits<double>::infinity();
    double xr = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0, n = v.size(); k < n; ++k) {
      const Vec2& a = v[k];
      const Vec2& b = v[(k + 1) % n];
      const double lo = std::min(a.y, b.y);
      const double hi = std::max(a.y, b.y);
      if (yc < lo - kEps || yc > hi + kEps) {
        continue;
      }
      if (hi - lo <= kEps) {
        xl = std::min({xl, a.x, b.x});
        xr = std::max({xr, a.x, b.x});
      } else {
        const double x = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
        xl = std::min(xl, x);
        xr = std::max(xr, x);
      }
    }
    if (!(xl <= xr)) {
      continue;
    }
    const long i0 = std::max(0L, static_cast<long>(std::ceil((xl - g.region.min.x) / g.cx - 0.5 - kEps)));
    const long i1 = std::min(g.nx - 1, static_cast<long>(std::floor((xr - g.region.min.x) / g.cx - 0.5 + kEps)));
    for (long i = i0; i <= i1; ++i) {
      fn(j * g.nx + i);
    }
  }
}

}  // namespace

double raster_area(std::span<const Poly2> set_a, std::span<const Poly2> set_b, double cell) {
  if (set_a.empty() || set_b.empty()) {
    return 0.0;
  }
  const Rect2 region = intersect(union_bounds(set_a), union_bounds(set_b));
  if (region.empty()) {
    return 0.0;
  }
  const Grid g = make_grid(region, cell);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.nx * g.ny), 0);
  for (const Poly2& p : set_a) {
    scan_polygon(g, p, [&](long idx) { mask[static_cast<std::size_t>(idx)] = 1; });
  }
  long both = 0;
  for (const Poly2& p : set_b) {
    scan_polygon(g, p, [&](long idx) {
      auto& m = mask[static_cast<std::size_t>(idx)];
      if (m == 1) {
        m = 2;
        ++both;
      }
    });
  }
  return static_cast<double>(both) * g.cx * g.cy;
}

double raster_union_area(std::span<const Poly2> polys, double cell) {
  if (polys.empty()) {
    return 0.0;
  }
  const Rect2 region = union_bounds(polys);
  if (region.empty()) {
    return 0.0;
  }
  const Grid g = make_grid(region, cell);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.nx * g.ny), 0);
  long count = 0;
  for (const Poly2& p : polys) {
    scan_polygon(g, p, [&](long idx) {
      auto& m = mask[static_cast<std::size_t>(idx)];
      if (m == 0) {
        m = 1;
        ++count;
      }
    });
  }
  return static_cast<double>(count) * g.cx * g.cy;
}

RasterOverlap raster_overlap(std::span<const Poly2> base, std::span<const Poly2> other, double cell) {
  RasterOverlap out;
  if (base.empty()) {
    return out;
  }
  const Rect2 region = union_bounds(base);
  if (region.empty()) {
    return out;
  }
  const Grid g = make_grid(region, cell);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.nx * g.ny), 0);
  long in_base = 0;
  long shared = 0;
  for (const Poly2& p : base) {
    scan_polygon(g, p, [&](long idx) {
      auto& m = mask[static_cast<std::size_t>(idx)];
      if (m == 0) {
        m = 1;
        ++in_base;
      }
    });
  }
  for (const Poly2& p : other) {
    if (!boxes_overlap(p.bounds(), region)) {
      continue;
    }
    scan_polygon(g, p, [&](long idx) {
      auto& m = mask[static_cast<std::size_t>(idx)];
      if (m == 1) {
        m = 2;
        ++shared;
      }
    });
  }
  out.base_area = static_cast<double>(in_base) * g.cx * g.cy;
  out.shared_area = static_cast<double>(shared) * g.cx * g.cy;
  return out;
}

}  // namespace lswarm
