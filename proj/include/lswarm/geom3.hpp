#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace lswarm {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Position (m) or velocity (m/s) in the world frame; z is altitude.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
constexpr double norm_sq(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm_sq(a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Unit vector along `a`; throws ZeroVectorError when |a| <= 1e-12.
Vec3 normalized(const Vec3& a);

/// Ground-plane coordinates (m).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator*(const Vec2& a, double s) { return {a.x * s, a.y * s}; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr Vec2 xy(const Vec3& v) { return {v.x, v.y}; }

/// Row-major 3x3 rotation.
class RotMat {
 public:
  constexpr RotMat() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
  constexpr explicit RotMat(const std::array<double, 9>& m) : m_(m) {}

  static constexpr RotMat identity() { return RotMat(); }

  constexpr double operator()(int row, int col) const { return m_[row * 3 + col]; }
  constexpr const std::array<double, 9>& entries() const { return m_; }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {m_[0] * v.x + m_[1] * v.y + m_[2] * v.z, m_[3] * v.x + m_[4] * v.y + m_[5] * v.z,
            m_[6] * v.x + m_[7] * v.y + m_[8] * v.z};
  }
  RotMat operator*(const RotMat& o) const;
  RotMat transposed() const;
  double determinant() const;

 private:
  std::array<double, 9> m_;
};

/// Rotation by `alpha_deg` about +Z (yaw).
RotMat rot_z(double alpha_deg);
/// Rotation by `beta_deg` about +Y; rot_y(b) * (1,0,0) = (cos b, 0, -sin b).
RotMat rot_y(double beta_deg);

/// Rotation taking (1,0,0) onto v/|v|, built as rot_z(yaw) * rot_y(pitch) so
/// the lateral axis stays level. Throws ZeroVectorError for |v| <= 1e-9.
RotMat align_x_to(const Vec3& v);

/// Yaw/pitch pair (degrees) such that rot_z(yaw) * rot_y(pitch) * x = v/|v|.
struct Heading {
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
};
Heading heading_of(const Vec3& v);

/// Axis-aligned box; min <= max componentwise.
struct Box3 {
  Vec3 min;
  Vec3 max;

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
};

struct ClosestPoint {
  Vec3 point;
  double distance = 0.0;
};

ClosestPoint closest_point_box(const Vec3& p, const Box3& b);
Vec3 closest_point_segment(const Vec3& p, const Vec3& a, const Vec3& b);

struct Rect2 {
  Vec2 min;
  Vec2 max;
  bool empty() const { return !(min.x < max.x && min.y < max.y); }
  double area() const { return empty() ? 0.0 : (max.x - min.x) * (max.y - min.y); }
};

Rect2 intersect(const Rect2& a, const Rect2& b);

/// Convex, counter-clockwise polygon in the ground plane.
class Poly2 {
 public:
  Poly2() = default;
  /// Takes ownership of the vertex list; orientation is normalised to CCW.
  /// Throws DegeneratePolygonError for fewer than three vertices.
  explicit Poly2(std::vector<Vec2> vertices);

  static Poly2 square(Vec2 center, double side);
  static Poly2 rect(const Rect2& r);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const;
  const Rect2& bounds() const { return bounds_; }

 private:
  std::vector<Vec2> vertices_;
  Rect2 bounds_;
};

/// Shoelace signed area (positive for CCW).
double signed_area(std::span<const Vec2> vertices);

/// Sutherland–Hodgman clip of a convex subject by a convex clip polygon.
/// Returns an empty vertex list when the intersection has no area.
std::vector<Vec2> clip_convex(const Poly2& subject, const Poly2& clip);

/// Exact area of the union of convex polygons. The boundary of the union is
/// traced edge by edge; coincident same-direction edges are counted once.
double union_area(std::span<const Poly2> polys);

/// Area of (union a) ∩ (union b) by pairwise convex clipping followed by an
/// exact union of the clipped pieces.
double intersection_area(std::span<const Poly2> set_a, std::span<const Poly2> set_b);

/// Same quantity as intersection_area, computed as
/// |∪a| + |∪b| - |∪a ∪ ∪b|. Much cheaper when the sets overlap heavily.
double intersection_area_by_unions(std::span<const Poly2> set_a, std::span<const Poly2> set_b);
double intersection_area_by_unions(std::span<const Poly2> set_a, double union_a_area,
                                   std::span<const Poly2> set_b);

/// Grid-sampled intersection area. The grid spans the overlap of the two
/// sets' bounding boxes with a cell no larger than `cell`.
double raster_area(std::span<const Poly2> set_a, std::span<const Poly2> set_b, double cell);

/// Grid-sampled area of a single union, same grid convention as raster_area.
double raster_union_area(std::span<const Poly2> polys, double cell);

struct RasterOverlap {
  double base_area = 0.0;    ///< |∪base|
  double shared_area = 0.0;  ///< |∪base ∩ ∪other|
};
/// Both areas sampled on one grid spanning the bounding box of `base`.
RasterOverlap raster_overlap(std::span<const Poly2> base, std::span<const Poly2> other, double cell);

}  // namespace lswarm
