#pragma once

#include <filesystem>
#include <vector>

#include "lswarm/coverage.hpp"
#include "lswarm/environment.hpp"
#include "lswarm/geom3.hpp"

namespace lswarm {

struct PlanConfig {
  double clearance = 2.0;     ///< height kept above overflown buildings, m
  double row_factor = 1.0;    ///< row spacing as a fraction of the footprint side
  int agents = 1;
  double agent_radius = 0.5;  ///< m
  double margin = 0.5;        ///< extra lateral keep-out around the flight line, m

  /// Throws ValidationError on a bad field.
  void validate() const;
};

struct WaypointPath {
  int agent = 0;
  std::vector<Vec3> waypoints;
  double length() const;
};

/// Boustrophedon sweep at the optimal altitude, lifted over buildings and
/// split into contiguous blocks, one per agent.
/// Throws InfeasibleAltitudeError when the tallest building plus clearance is
/// beyond the sensing range.
std::vector<WaypointPath> plan(const UrbanModel& model, const CameraModel& cam, const PlanConfig& cfg);

/// Fraction of free ground cells not seen by any footprint along the paths.
/// `cell` <= 0 picks a tenth of the footprint side at the optimal altitude.
double verify_coverage(const std::vector<WaypointPath>& paths, const UrbanModel& model,
                       const CameraModel& cam, double cell = 0.0);

/// CSV with header agent,index,x,y,z.
void write_waypoints(const std::vector<WaypointPath>& paths, const std::filesystem::path& out);
std::vector<WaypointPath> read_waypoints(const std::filesystem::path& in);

}  // namespace lswarm
