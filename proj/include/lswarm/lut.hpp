#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lswarm/coverage.hpp"
#include "lswarm/geom3.hpp"

namespace lswarm {

/// One rotation of the unit velocity and how much of its swept area it keeps.
struct LutEntry {
  double alpha = 0.0;  ///< yaw, degrees
  double beta = 0.0;   ///< pitch, degrees
  Vec3 v;              ///< unit direction (cosβcosα, sinα, -sinβcosα)
  double deviation = 0.0;  ///< |x̂ - v|
  double overlap = 0.0;    ///< area_unit ∩ area_αβ, m²
};

struct LutHeader {
  double theta_deg = 45.0;
  double h_ref = 5.0;
  double tau = 2.0;
  double dt = 0.2;
  double step_deg = 1.0;
  double speed = 1.0;  ///< speed of the swept reference velocity, m/s
};

/// Unit direction for yaw alpha and pitch beta (degrees), z up.
Vec3 lut_direction(double alpha_deg, double beta_deg);

class LookupTable {
 public:
  LookupTable() = default;
  /// Rows must be in build order: alpha outer, beta inner, both ascending.
  /// Throws ValidationError when the row count does not match the step.
  LookupTable(LutHeader header, std::vector<LutEntry> entries);

  const LutHeader& header() const { return header_; }
  const std::vector<LutEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  int per_axis() const { return n_; }
  const LutEntry& at(int ia, int ib) const { return entries_[static_cast<std::size_t>(ia * n_ + ib)]; }

  /// Row indices by overlap descending (ties: smaller deviation, then index).
  const std::vector<std::uint32_t>& by_overlap() const { return by_overlap_; }
  /// Row indices by deviation ascending (ties by index).
  const std::vector<std::uint32_t>& by_deviation() const { return by_deviation_; }
  /// Position of each row in by_overlap().
  const std::vector<std::uint32_t>& rank() const { return rank_; }

  /// Row whose direction is closest to `dir` (table frame, any length > 0).
  std::size_t nearest(const Vec3& dir) const;

 private:
  LutHeader header_;
  std::vector<LutEntry> entries_;
  int n_ = 0;
  std::vector<std::uint32_t> by_overlap_;
  std::vector<std::uint32_t> by_deviation_;
  std::vector<std::uint32_t> rank_;
};

/// Overlap of the swept areas of speed·x̂ and speed·dir from h_ref over tau.
/// Footprints are axis-aligned squares, so the union is evaluated exactly on
/// the compressed grid of their edges.
double lut_overlap(const Vec3& dir, const CameraModel& cam, const LutHeader& h);
/// Same value through polygon clipping; slower, independent of the above.
double lut_overlap_clipped(const Vec3& dir, const CameraModel& cam, const LutHeader& h);

/// Throws OutOfRangeError when step_deg does not divide 180 or the timing is bad.
/// `workers` <= 0 uses the default TBB concurrency.
LookupTable build_lut(const CameraModel& cam, const LutHeader& h, int workers = 0);

void write_lut(const LookupTable& lut, const std::filesystem::path& out);
/// Throws ParseError for malformed files.
LookupTable read_lut(const std::filesystem::path& in);

struct LutCheck {
  bool rows_ok = false;       ///< (180/step + 1)² rows on the expected grid
  bool geometry_ok = false;   ///< directions and deviations recomputed
  bool origin_ok = false;     ///< (0,0) has zero deviation and the largest overlap
  bool unique_max = false;    ///< no other row comes within 1e-9 relative of (0,0)
  bool samples_ok = false;    ///< random rows agree with the clipping recomputation
  double worst_rel_err = 0.0;
  std::size_t samples = 0;
  std::vector<std::string> problems;

  bool ok() const { return rows_ok && geometry_ok && origin_ok && samples_ok; }
};

/// Recomputes `samples` random rows (seeded) with polygon clipping, relative tolerance `rel_tol`.
LutCheck verify_lut(const LookupTable& lut, const CameraModel& cam, std::size_t samples = 50,
                    std::uint64_t seed = 1, double rel_tol = 1e-6);

}  // namespace lswarm
