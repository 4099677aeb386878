#include <doctest.h>

#include <chrono>
#include <filesystem>

#include "lswarm/errors.hpp"
#include "lswarm/lawnmower.hpp"

using namespace lswarm;

namespace {

// Camera whose footprint side at the optimal altitude is exactly `side`.
CameraModel camera_with_side(double side, double h_star = 5.0) {
  CameraModel cam;
  cam.gsd_max = cam.k_h() * h_star;
  cam.theta_deg = rad2deg(std::atan(side * std::sqrt(2.0) / h_star));
  return cam;
}

}  // namespace

TEST_CASE("empty 10x10 area gives five serpentine rows") {
  const UrbanModel m("e", 10, 10, {});
  const CameraModel cam = camera_with_side(2.0);
  const auto paths = plan(m, cam, {});
  REQUIRE(paths.size() == 1);
  const auto& w = paths[0].waypoints;
  // each row compresses to its two ends, turns add nothing at equal altitude
  REQUIRE(w.size() == 10);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(w[2 * r].y == doctest::Approx(1.0 + 2.0 * static_cast<double>(r)));
    const double dir = w[2 * r + 1].x - w[2 * r].x;
    CHECK((r % 2 == 0 ? dir > 0 : dir < 0));
  }
  for (const Vec3& p : w) {
    CHECK(p.z == doctest::Approx(5.0));
  }
  CHECK(verify_coverage(paths, m, cam) == 0.0);
}

TEST_CASE("sparse rows leave gaps; no paths see nothing") {
  const UrbanModel m("e", 10, 10, {});
  const CameraModel cam = camera_with_side(2.0);
  PlanConfig cfg;
  cfg.row_factor = 2.0;
  CHECK(verify_coverage(plan(m, cam, cfg), m, cam) > 0.0);
  CHECK(verify_coverage({}, m, cam) == 1.0);
}

TEST_CASE("building raises the crossing row") {
  const UrbanModel m("b", 20, 10, {{{8, 4, 0}, {12, 6, 8}}});
  const CameraModel cam = camera_with_side(2.0);
  PlanConfig cfg;
  cfg.clearance = 2.0;
  const auto paths = plan(m, cam, cfg);
  bool saw_high = false;
  for (const Vec3& p : paths[0].waypoints) {
    const bool over = p.x >= 8 - 1e-9 && p.x <= 12 + 1e-9 && p.y >= 4 && p.y <= 6;
    if (over) {
      CHECK(p.z == doctest::Approx(10.0));
    }
    saw_high = saw_high || p.z == doctest::Approx(10.0);
    CHECK((p.z == doctest::Approx(5.0) || p.z == doctest::Approx(10.0)));
  }
  CHECK(saw_high);
}

TEST_CASE("partition consistency") {
  const UrbanModel m = load_model("data/models/high_sparse.json");
  const CameraModel cam;
  PlanConfig one;
  PlanConfig two;
  two.agents = 2;
  const auto p1 = plan(m, cam, one);
  const auto p2 = plan(m, cam, two);
  REQUIRE(p2.size() == 2);
  std::vector<Vec3> cat = p2[0].waypoints;
  cat.insert(cat.end(), p2[1].waypoints.begin(), p2[1].waypoints.end());
  CHECK(cat == p1[0].waypoints);
  const double ratio = p2[0].length() / p2[1].length();
  CHECK(ratio > 0.7);
  CHECK(ratio < 1.4);
}

TEST_CASE("more agents than rows") {
  const UrbanModel m = load_model("data/models/high_dense.json");
  const CameraModel cam;
  PlanConfig cfg;
  cfg.agents = 20;
  const auto paths = plan(m, cam, cfg);
  REQUIRE(paths.size() == 20);
  for (const auto& p : paths) {
    CHECK(p.waypoints.size() >= 2);
    for (std::size_t i = 1; i < p.waypoints.size(); ++i) {
      CHECK(distance(p.waypoints[i - 1], p.waypoints[i]) > 1e-9);
    }
  }
}

TEST_CASE("fixture paths clear the buildings and cover the free ground") {
  for (const char* file : {"data/models/high_dense.json", "data/models/high_sparse.json",
                           "data/models/low_dense.json", "data/models/low_sparse.json"}) {
    const UrbanModel m = load_model(file);
    const CameraModel cam;
    PlanConfig cfg;
    cfg.agents = 4;
    const auto paths = plan(m, cam, cfg);
    for (const auto& p : paths) {
      for (std::size_t i = 0; i < p.waypoints.size(); ++i) {
        const auto n = nearest_obstacle_point(m, p.waypoints[i]);
        REQUIRE(n.has_value());
        CHECK(n->distance > cfg.agent_radius);
        // whole segment, sampled
        if (i == 0) continue;
        for (int s = 1; s < 20; ++s) {
          const Vec3 q = p.waypoints[i - 1] + (p.waypoints[i] - p.waypoints[i - 1]) * (s / 20.0);
          CHECK(nearest_obstacle_point(m, q)->distance > cfg.agent_radius);
        }
      }
    }
    CHECK(verify_coverage(paths, m, cam) == 0.0);
  }
}

TEST_CASE("infeasible altitude") {
  const UrbanModel m("t", 20, 20, {{{5, 5, 0}, {8, 8, 39}}});
  CHECK_THROWS_AS(plan(m, CameraModel{}, {}), InfeasibleAltitudeError);
}

TEST_CASE("waypoint file round trip") {
  const UrbanModel m = load_model("data/models/low_sparse.json");
  PlanConfig cfg;
  cfg.agents = 3;
  const auto paths = plan(m, CameraModel{}, cfg);
  const auto tmp = std::filesystem::temp_directory_path() / "lswarm_wp_roundtrip.csv";
  write_waypoints(paths, tmp);
  const auto back = read_waypoints(tmp);
  REQUIRE(back.size() == paths.size());
  for (std::size_t a = 0; a < paths.size(); ++a) {
    CHECK(back[a].waypoints == paths[a].waypoints);
  }
  std::filesystem::remove(tmp);
}
