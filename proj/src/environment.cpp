#include "lswarm/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "lswarm/errors.hpp"

namespace lswarm {

namespace {

bool finite(const Box3& b) {
  return std::isfinite(b.min.x) && std::isfinite(b.min.y) && std::isfinite(b.min.z) &&
         std::isfinite(b.max.x) && std::isfinite(b.max.y) && std::isfinite(b.max.z);
}

// Horizontal distance from (x, y) to a rectangle.
double rect_distance(double x, double y, double x0, double y0, double x1, double y1) {
  const double dx = std::max({x0 - x, 0.0, x - x1});
  const double dy = std::max({y0 - y, 0.0, y - y1});
  return std::hypot(dx, dy);
}

}  // namespace

UrbanModel::UrbanModel(std::string name, double width, double length, std::vector<Box3> buildings)
    : name_(std::move(name)), width_(width), length_(length), buildings_(std::move(buildings)) {
  if (!(width_ > 0.0) || !(length_ > 0.0) || !std::isfinite(width_) || !std::isfinite(length_)) {
    throw ValidationError("ground bounds must be positive and finite");
  }
  constexpr double kTol = 1e-9;
  for (std::size_t i = 0; i < buildings_.size(); ++i) {
    const Box3& b = buildings_[i];
    const long idx = static_cast<long>(i);
    if (!finite(b)) {
      throw ValidationError("building " + std::to_string(i) + " has non-finite coordinates", idx);
    }
    if (!(b.min.x < b.max.x) || !(b.min.y < b.max.y) || !(b.max.z > 0.0)) {
      throw ValidationError("building " + std::to_string(i) + " has empty extent", idx);
    }
    if (b.min.z != 0.0) {
      throw ValidationError("building " + std::to_string(i) + " does not rest on the ground", idx);
    }
    if (b.min.x < -kTol || b.min.y < -kTol || b.max.x > width_ + kTol || b.max.y > length_ + kTol) {
      throw ValidationError("building " + std::to_string(i) + " extends past the ground bounds", idx);
    }
  }
  build_buckets();
}

double UrbanModel::max_height() const {
  double h = 0.0;
  for (const Box3& b : buildings_) {
    h = std::max(h, b.max.z);
  }
  return h;
}

std::optional<std::size_t> UrbanModel::building_at(double x, double y) const {
  for (std::size_t i = 0; i < buildings_.size(); ++i) {
    const Box3& b = buildings_[i];
    if (x >= b.min.x && x <= b.max.x && y >= b.min.y && y <= b.max.y) {
      return i;
    }
  }
  return std::nullopt;
}

void UrbanModel::build_buckets() {
  buckets_.clear();
  if (buildings_.empty()) {
    return;
  }
  // Roughly one building per bucket on average, never finer than 2 m.
  const double per = std::sqrt(width_ * length_ / static_cast<double>(buildings_.size()));
  bucket_ = std::max(2.0, per);
  bx_ = std::max(1L, static_cast<long>(std::ceil(width_ / bucket_)));
  by_ = std::max(1L, static_cast<long>(std::ceil(length_ / bucket_)));
  buckets_.assign(static_cast<std::size_t>(bx_ * by_), {});
  for (std::size_t k = 0; k < buildings_.size(); ++k) {
    const Box3& b = buildings_[k];
    const long i0 = std::clamp(static_cast<long>(std::floor(b.min.x / bucket_)), 0L, bx_ - 1);
    const long i1 = std::clamp(static_cast<long>(std::floor(b.max.x / bucket_)), 0L, bx_ - 1);
    const long j0 = std::clamp(static_cast<long>(std::floor(b.min.y / bucket_)), 0L, by_ - 1);
    const long j1 = std::clamp(static_cast<long>(std::floor(b.max.y / bucket_)), 0L, by_ - 1);
    for (long j = j0; j <= j1; ++j) {
      for (long i = i0; i <= i1; ++i) {
        buckets_[static_cast<std::size_t>(j * bx_ + i)].push_back(static_cast<std::uint32_t>(k));
      }
    }
  }
}

std::optional<UrbanModel::Nearest> UrbanModel::nearest(const Vec3& p) const {
  if (buildings_.empty()) {
    return std::nullopt;
  }
  Nearest best;
  best.distance = std::numeric_limits<double>::infinity();
  best.building = std::numeric_limits<std::size_t>::max();
  auto consider = [&](std::size_t k) {
    const ClosestPoint cp = closest_point_box(p, buildings_[k]);
    if (cp.distance < best.distance || (cp.distance == best.distance && k < best.building)) {
      best = {cp.point, cp.distance, k};
    }
  };

  const long ci = static_cast<long>(std::floor(p.x / bucket_));
  const long cj = static_cast<long>(std::floor(p.y / bucket_));
  const long reach = std::max({std::abs(ci), std::abs(ci - (bx_ - 1)), std::abs(cj), std::abs(cj - (by_ - 1))});
  for (long ring = 0; ring <= reach; ++ring) {
    // Lower bound on the horizontal distance to anything outside the block
    // of buckets already visited (rings 0..ring-1).
    if (ring > 0) {
      const double x0 = static_cast<double>(ci - ring + 1) * bucket_;
      const double x1 = static_cast<double>(ci + ring) * bucket_;
      const double y0 = static_cast<double>(cj - ring + 1) * bucket_;
      const double y1 = static_cast<double>(cj + ring) * bucket_;
      const double bound = std::min({p.x - x0, x1 - p.x, p.y - y0, y1 - p.y});
      if (bound > best.distance) {
        break;
      }
    }
    for (long j = cj - ring; j <= cj + ring; ++j) {
      if (j < 0 || j >= by_) {
        continue;
      }
      for (long i = ci - ring; i <= ci + ring; ++i) {
        if (i < 0 || i >= bx_) {
          continue;
        }
        if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) {
          continue;
        }
        const double d = rect_distance(p.x, p.y, static_cast<double>(i) * bucket_,
                                       static_cast<double>(j) * bucket_,
                                       static_cast<double>(i + 1) * bucket_,
                                       static_cast<double>(j + 1) * bucket_);
        if (d > best.distance) {
          continue;
        }
        for (std::uint32_t k : buckets_[static_cast<std::size_t>(j * bx_ + i)]) {
          consider(k);
        }
      }
    }
  }
  return best;
}

std::optional<ClosestPoint> nearest_obstacle_point(const UrbanModel& model, const Vec3& p) {
  const auto n = model.nearest(p);
  if (!n) {
    return std::nullopt;
  }
  return ClosestPoint{n->point, n->distance};
}

UrbanModel model_from_json(const nlohmann::json& j) {
  try {
    const std::string name = j.value("name", std::string{});
    const auto& bounds = j.at("bounds");
    const double w = bounds.at("w").get<double>();
    const double l = bounds.at("l").get<double>();
    std::vector<Box3> boxes;
    if (j.contains("buildings")) {
      for (const auto& b : j.at("buildings")) {
        boxes.push_back({{b.at("x_min").get<double>(), b.at("y_min").get<double>(), 0.0},
                         {b.at("x_max").get<double>(), b.at("y_max").get<double>(),
                          b.at("height").get<double>()}});
      }
    }
    return UrbanModel(name, w, l, std::move(boxes));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

nlohmann::json model_to_json(const UrbanModel& m) {
  nlohmann::json j;
  j["name"] = m.name();
  j["bounds"] = {{"w", m.width()}, {"l", m.length()}};
  j["buildings"] = nlohmann::json::array();
  for (const Box3& b : m.buildings()) {
    j["buildings"].push_back({{"x_min", b.min.x},
                              {"y_min", b.min.y},
                              {"x_max", b.max.x},
                              {"y_max", b.max.y},
                              {"height", b.max.z}});
  }
  return j;
}

UrbanModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open model file " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

void save_model(const UrbanModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << model_to_json(m).dump(2) << '\n';
}

OccupancyGrid::OccupancyGrid(double cell, long nx, long ny)
    : cell_(cell),
      nx_(nx),
      ny_(ny),
      occupied_(static_cast<std::size_t>(nx * ny), 0),
      height_(static_cast<std::size_t>(nx * ny), 0.0) {}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupied_.begin(), occupied_.end(), 1));
}

void OccupancyGrid::mark(long i, long j, double h) {
  const std::size_t k = index(i, j);
  occupied_[k] = 1;
  height_[k] = std::max(height_[k], h);
}

double OccupancyGrid::max_height_in(const Rect2& r) const {
  const long i0 = std::max(0L, static_cast<long>(std::floor(r.min.x / cell_)));
  const long i1 = std::min(nx_ - 1, static_cast<long>(std::ceil(r.max.x / cell_)) - 1);
  const long j0 = std::max(0L, static_cast<long>(std::floor(r.min.y / cell_)));
  const long j1 = std::min(ny_ - 1, static_cast<long>(std::ceil(r.max.y / cell_)) - 1);
  double h = 0.0;
  for (long j = j0; j <= j1; ++j) {
    for (long i = i0; i <= i1; ++i) {
      h = std::max(h, height_[index(i, j)]);
    }
  }
  return h;
}

OccupancyGrid build_occupancy(const UrbanModel& model, double cell) {
  if (!(cell > 0.0)) {
    throw OutOfRangeError("occupancy cell size must be positive");
  }
  const long nx = std::max(1L, static_cast<long>(std::ceil(model.width() / cell - 1e-9)));
  const long ny = std::max(1L, static_cast<long>(std::ceil(model.length() / cell - 1e-9)));
  OccupancyGrid grid(cell, nx, ny);
  for (const Box3& b : model.buildings()) {
    const long i0 = std::max(0L, static_cast<long>(std::floor(b.min.x / cell)));
    const long i1 = std::min(nx - 1, static_cast<long>(std::ceil(b.max.x / cell)) - 1);
    const long j0 = std::max(0L, static_cast<long>(std::floor(b.min.y / cell)));
    const long j1 = std::min(ny - 1, static_cast<long>(std::ceil(b.max.y / cell)) - 1);
    for (long j = j0; j <= j1; ++j) {
      for (long i = i0; i <= i1; ++i) {
        grid.mark(i, j, b.max.z);
      }
    }
  }
  return grid;
}

}  // namespace lswarm
