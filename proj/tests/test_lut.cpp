#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "lswarm/errors.hpp"
#include "lswarm/lut.hpp"

using namespace lswarm;

namespace {

CameraModel cam_r1() {
  CameraModel c;
  c.theta_deg = rad2deg(std::atan(0.4));
  return c;
}

LutHeader header_for(const CameraModel& c, double step) {
  LutHeader h;
  h.theta_deg = c.theta_deg;
  h.step_deg = step;
  h.tau = 2.0;
  h.dt = 0.2;
  return h;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lswarm_test_" + name);
}

}  // namespace

TEST_CASE("lut_direction matches the rotation product") {
  for (double a : {-90.0, -33.0, 0.0, 12.0, 90.0}) {
    for (double b : {-90.0, -7.0, 0.0, 45.0, 90.0}) {
      const Vec3 r = rot_y(b) * (rot_z(a) * Vec3{1, 0, 0});
      CHECK(distance(lut_direction(a, b), r) < 1e-12);
    }
  }
}

TEST_CASE("overlap: origin keeps the whole swept area") {
  const CameraModel c = cam_r1();
  const LutHeader h = header_for(c, 5.0);
  const double s = footprint_side(h.h_ref, c);
  // square swept 2 m along x
  CHECK(lut_overlap({1, 0, 0}, c, h) == doctest::Approx(s * s + s * h.speed * h.tau).epsilon(1e-12));
  // compressed grid against polygon clipping
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-90, 90);
  for (int k = 0; k < 100; ++k) {
    const Vec3 d = lut_direction(u(rng), u(rng));
    const double a = lut_overlap(d, c, h);
    const double b = lut_overlap_clipped(d, c, h);
    CHECK(std::abs(a - b) <= 1e-9 * b);
  }
}

TEST_CASE("row counts") {
  const CameraModel c = cam_r1();
  CHECK(build_lut(c, header_for(c, 5.0)).size() == 1369);
  CHECK(build_lut(c, header_for(c, 90.0)).size() == 9);
  CHECK_THROWS_AS(build_lut(c, header_for(c, 7.0)), OutOfRangeError);
}

TEST_CASE("1 degree table") {
  const CameraModel c = cam_r1();
  const auto t0 = std::chrono::steady_clock::now();
  const LookupTable lut = build_lut(c, header_for(c, 1.0));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("1 degree build: " << secs << " s");
  CHECK(lut.size() == 32761);
  const LutEntry& o = lut.at(90, 90);
  CHECK(o.alpha == 0.0);
  CHECK(o.beta == 0.0);
  CHECK(o.deviation == 0.0);
  const LutCheck chk = verify_lut(lut, c);
  CHECK(chk.rows_ok);
  CHECK(chk.geometry_ok);
  CHECK(chk.origin_ok);
  CHECK(chk.samples_ok);
  CHECK(chk.samples == 50);

  // nearest() agrees with a full scan on forward directions
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 300; ++k) {
    Vec3 d{std::abs(u(rng)) + 0.05, u(rng), u(rng)};
    d = normalized(d);
    double best = -2;
    for (const LutEntry& e : lut.entries()) best = std::max(best, dot(e.v, d));
    CHECK(dot(lut.entries()[lut.nearest(d)].v, d) == doctest::Approx(best).epsilon(1e-14));
  }
  // sorted views
  for (std::size_t k = 1; k < lut.size(); ++k) {
    CHECK(lut.entries()[lut.by_overlap()[k - 1]].overlap >= lut.entries()[lut.by_overlap()[k]].overlap * (1 - 1e-12));
  }
}

TEST_CASE("file round trip and tamper detection") {
  const CameraModel c = cam_r1();
  const LookupTable lut = build_lut(c, header_for(c, 5.0));
  const auto path = tmp("lut5.txt");
  write_lut(lut, path);
  const LookupTable back = read_lut(path);
  REQUIRE(back.size() == lut.size());
  for (std::size_t k = 0; k < lut.size(); ++k) {
    CHECK(back.entries()[k].overlap == lut.entries()[k].overlap);
    CHECK(back.entries()[k].v == lut.entries()[k].v);
  }
  CHECK(verify_lut(back, c, 1369).ok());

  // scale every overlap a little
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  LookupTable scaled = back;
  std::vector<LutEntry> rows = back.entries();
  for (auto& e : rows) e.overlap *= 1.001;
  const auto bad = tmp("lut5_bad.txt");
  write_lut(LookupTable(back.header(), rows), bad);
  CHECK_FALSE(verify_lut(read_lut(bad), c, 1369).ok());

  // drop a row
  std::ofstream out(bad);
  out << text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  out.close();
  CHECK_THROWS_AS(read_lut(bad), ParseError);
  std::filesystem::remove(path);
  std::filesystem::remove(bad);
}
