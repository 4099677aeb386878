#include "lswarm/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lswarm/errors.hpp"

namespace lswarm {

void CameraModel::validate() const {
  if (!(theta_deg > 0.0 && theta_deg < 90.0)) {
    throw ValidationError("camera theta must lie in (0, 90) degrees");
  }
  if (!(sensor_width_mm > 0.0 && sensor_height_mm > 0.0 && focal_mm > 0.0 && image_width_px > 0.0 &&
        image_height_px > 0.0)) {
    throw ValidationError("camera sensor, focal length and image size must be positive");
  }
  if (!(gsd_max > 0.0)) {
    throw ValidationError("camera gsd_max must be positive");
  }
  if (!(sensing_range > 0.0)) {
    throw ValidationError("camera sensing range must be positive");
  }
}

double CameraModel::gsd_limit_altitude() const { return gsd_max / std::max(k_h(), k_w()); }

CameraModel camera_from_json(const nlohmann::json& j) {
  CameraModel c;
  try {
    c.theta_deg = j.value("theta_deg", c.theta_deg);
    c.sensor_width_mm = j.value("sensor_width_mm", c.sensor_width_mm);
    c.sensor_height_mm = j.value("sensor_height_mm", c.sensor_height_mm);
    c.focal_mm = j.value("focal_mm", c.focal_mm);
    c.image_width_px = j.value("image_width_px", c.image_width_px);
    c.image_height_px = j.value("image_height_px", c.image_height_px);
    c.gsd_max = j.value("gsd_max", c.gsd_max);
    c.sensing_range = j.value("sensing_range", c.sensing_range);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json camera_to_json(const CameraModel& c) {
  return {{"theta_deg", c.theta_deg},           {"sensor_width_mm", c.sensor_width_mm},
          {"sensor_height_mm", c.sensor_height_mm}, {"focal_mm", c.focal_mm},
          {"image_width_px", c.image_width_px},   {"image_height_px", c.image_height_px},
          {"gsd_max", c.gsd_max},                 {"sensing_range", c.sensing_range}};
}

CameraModel load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open camera file " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return camera_from_json(j);
}

double footprint_side(double h, const CameraModel& cam) {
  if (!(h >= 0.0) || h > cam.sensing_range) {
    throw OutOfRangeError("altitude " + std::to_string(h) + " outside [0, " +
                          std::to_string(cam.sensing_range) + "]");
  }
  return h * std::tan(deg2rad(cam.theta_deg)) / std::sqrt(2.0);
}

Gsd gsd(double h, const CameraModel& cam) { return {cam.k_h() * h, cam.k_w() * h}; }

double optimal_altitude(const CameraModel& cam) {
  return std::min(cam.gsd_limit_altitude(), cam.sensing_range);
}

void CoverageTrace::push_back(const Footprint& f) {
  if (!footprints_.empty() && !(f.time > footprints_.back().time)) {
    throw std::invalid_argument("coverage trace timestamps must strictly increase");
  }
  footprints_.push_back(f);
}

std::vector<Poly2> CoverageTrace::polygons(bool require_resolution) const {
  std::vector<Poly2> out;
  out.reserve(footprints_.size());
  for (const Footprint& f : footprints_) {
    if (!f.valid || f.side <= 0.0 || (require_resolution && !f.resolution_ok)) {
      continue;
    }
    out.push_back(f.polygon());
  }
  return out;
}

Footprint footprint_at(Vec2 center, double h, double time, const CameraModel& cam) {
  Footprint f;
  f.center = center;
  f.time = time;
  f.valid = h >= 0.0 && h <= cam.sensing_range;
  const double clamped = std::clamp(h, 0.0, cam.sensing_range);
  f.side = footprint_side(clamped, cam);
  // Relative slack keeps samples exactly at the limit altitude compliant.
  f.resolution_ok = gsd(clamped, cam).worst() <= cam.gsd_max * (1.0 + 1e-12);
  return f;
}

CoverageTrace swept_footprints(const Vec3& v, double h0, double tau, double dt,
                               const CameraModel& cam, Vec2 origin) {
  if (!(tau > 0.0) || !(dt > 0.0) || dt > tau * (1.0 + 1e-12)) {
    throw OutOfRangeError("swept_footprints requires tau > 0 and 0 < dt <= tau");
  }
  const long steps = std::max(1L, std::lround(tau / dt));
  CoverageTrace trace;
  for (long k = 0; k <= steps; ++k) {
    const double t = tau * static_cast<double>(k) / static_cast<double>(steps);
    const Vec2 c{origin.x + v.x * t, origin.y + v.y * t};
    trace.push_back(footprint_at(c, h0 - v.z * t, t, cam));
  }
  return trace;
}

double overlap_ratio(const CoverageTrace& pref, const CoverageTrace& actual, const OverlapOptions& opts) {
  const std::vector<Poly2> p = pref.polygons(false);
  const std::vector<Poly2> a = actual.polygons(opts.require_resolution);
  double pref_area = 0.0;
  double inter = 0.0;
  if (opts.raster_cell > 0.0) {
    // One grid for both numbers so a perfect match gives exactly 1.
    const RasterOverlap r = raster_overlap(p, a, opts.raster_cell);
    pref_area = r.base_area;
    inter = r.shared_area;
  } else {
    pref_area = p.empty() ? 0.0 : union_area(p);
    inter = a.empty() ? 0.0 : intersection_area(p, a);
  }
  if (!(pref_area > 0.0)) {
    throw EmptyPreferredAreaError("preferred trace covers no area");
  }
  return std::clamp(inter / pref_area, 0.0, 1.0);
}

}  // namespace lswarm
