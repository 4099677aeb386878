#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lswarm/geom3.hpp"

namespace lswarm {

/// Downward-facing camera on a gimbal.
struct CameraModel {
  double theta_deg = 45.0;  ///< half apex angle of the sensing cone
  double sensor_width_mm = 6.4;
  double sensor_height_mm = 6.4;
  double focal_mm = 4.0;
  double image_width_px = 1600.0;
  double image_height_px = 1600.0;
  double gsd_max = 0.0065;         ///< m/px
  double sensing_range = 40.0;     ///< d_s_max, m

  double k_h() const { return sensor_height_mm / (focal_mm * image_height_px); }
  double k_w() const { return sensor_width_mm / (focal_mm * image_width_px); }
  /// Throws ValidationError when an invariant is broken.
  void validate() const;
  /// Altitude at which gsd reaches gsd_max (uncapped).
  double gsd_limit_altitude() const;
};

CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const CameraModel& cam);
/// Throws ParseError for unreadable/malformed files, ValidationError for bad content.
CameraModel load_camera(const std::filesystem::path& path);

/// Side of the largest square inscribed in the ground circle: h·tanθ/√2.
/// Throws OutOfRangeError outside [0, sensing_range].
double footprint_side(double h, const CameraModel& cam);

struct Gsd {
  double h = 0.0;
  double w = 0.0;
  double worst() const { return h > w ? h : w; }
};
Gsd gsd(double h, const CameraModel& cam);

/// Largest altitude with gsd <= gsd_max, capped at the sensing range.
double optimal_altitude(const CameraModel& cam);

struct Footprint {
  Vec2 center;
  double side = 0.0;
  double time = 0.0;
  bool valid = true;          ///< altitude within [0, sensing_range]
  bool resolution_ok = true;  ///< gsd <= gsd_max

  Poly2 polygon() const { return Poly2::square(center, side); }
};

/// Footprints of one agent ordered by strictly increasing time.
class CoverageTrace {
 public:
  /// Throws std::invalid_argument if `f.time` does not increase.
  void push_back(const Footprint& f);
  const std::vector<Footprint>& footprints() const { return footprints_; }
  std::size_t size() const { return footprints_.size(); }
  bool empty() const { return footprints_.empty(); }

  /// Polygons of usable footprints; optionally only resolution-compliant ones.
  std::vector<Poly2> polygons(bool require_resolution) const;

 private:
  std::vector<Footprint> footprints_;
};

/// Footprint at altitude h, flags filled from the camera.
Footprint footprint_at(Vec2 center, double h, double time, const CameraModel& cam);

/// Samples t = 0, dt, ..., tau of a constant velocity held from altitude h0,
/// starting over `origin`.
CoverageTrace swept_footprints(const Vec3& v, double h0, double tau, double dt,
                               const CameraModel& cam, Vec2 origin = {});

struct OverlapOptions {
  /// Only resolution-compliant footprints count toward `actual`.
  bool require_resolution = false;
  /// Raster cell for the fast path; <= 0 selects exact clipping.
  double raster_cell = 0.0;
};

/// area(pref ∩ actual) / area(pref). Coverage loss is 1 - ratio.
/// Throws EmptyPreferredAreaError when pref covers no area.
double overlap_ratio(const CoverageTrace& pref, const CoverageTrace& actual,
                     const OverlapOptions& opts = {});

}  // namespace lswarm
