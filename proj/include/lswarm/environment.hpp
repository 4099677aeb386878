#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lswarm/geom3.hpp"

namespace lswarm {

/// Urban scene: a ground rectangle [0,width] x [0,length] with box buildings
/// standing on it. Immutable after construction; the constructor validates
/// the layout and builds a bucket grid used to prune proximity queries.
class UrbanModel {
 public:
  UrbanModel() = default;
  /// Throws ValidationError (with the building index) on bad geometry.
  UrbanModel(std::string name, double width, double length, std::vector<Box3> buildings);

  const std::string& name() const { return name_; }
  double width() const { return width_; }
  double length() const { return length_; }
  Rect2 ground() const { return {{0.0, 0.0}, {width_, length_}}; }
  const std::vector<Box3>& buildings() const { return buildings_; }
  double max_height() const;

  /// Index of the building whose footprint contains (x, y), if any.
  std::optional<std::size_t> building_at(double x, double y) const;

  /// Nearest building surface point; ties resolve to the lowest building index.
  /// Uses the bucket grid, result identical to an exhaustive scan.
  struct Nearest {
    Vec3 point;
    double distance = 0.0;
    std::size_t building = 0;
  };
  std::optional<Nearest> nearest(const Vec3& p) const;

 private:
  void build_buckets();

  std::string name_;
  double width_ = 0.0;
  double length_ = 0.0;
  std::vector<Box3> buildings_;

  double bucket_ = 1.0;
  long bx_ = 0;
  long by_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

UrbanModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const UrbanModel& m);
/// Throws ParseError for unreadable/malformed files, ValidationError for bad content.
UrbanModel load_model(const std::filesystem::path& path);
void save_model(const UrbanModel& m, const std::filesystem::path& path);

/// Closest building point to `p`, or nothing for an empty scene. A point
/// inside a building returns itself at distance 0.
std::optional<ClosestPoint> nearest_obstacle_point(const UrbanModel& model, const Vec3& p);

/// 2-D occupancy of the ground plane at a fixed cell size.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double cell, long nx, long ny);

  double cell() const { return cell_; }
  long nx() const { return nx_; }
  long ny() const { return ny_; }
  bool occupied(long i, long j) const { return occupied_[index(i, j)] != 0; }
  double height(long i, long j) const { return height_[index(i, j)]; }
  std::size_t occupied_count() const;

  void mark(long i, long j, double h);

  /// Max building height over cells overlapping the rectangle (0 if none).
  double max_height_in(const Rect2& r) const;

 private:
  std::size_t index(long i, long j) const { return static_cast<std::size_t>(j * nx_ + i); }

  double cell_ = 1.0;
  long nx_ = 0;
  long ny_ = 0;
  std::vector<std::uint8_t> occupied_;
  std::vector<double> height_;
};

/// Cells are ceil(bounds / cell); a cell is occupied when a building
/// footprint overlaps it with positive area; its height is the max over those.
OccupancyGrid build_occupancy(const UrbanModel& model, double cell);

}  // namespace lswarm
