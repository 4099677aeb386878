#include "lswarm/lut.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "lswarm/errors.hpp"

namespace lswarm {

Vec3 lut_direction(double alpha_deg, double beta_deg) {
  const double a = deg2rad(alpha_deg);
  const double b = deg2rad(beta_deg);
  return {std::cos(b) * std::cos(a), std::sin(a), -std::sin(b) * std::cos(a)};
}

namespace {

int axis_count(double step_deg) {
  if (!(step_deg > 0.0) || step_deg > 180.0) {
    throw OutOfRangeError("LUT step must lie in (0, 180] degrees");
  }
  const double q = 180.0 / step_deg;
  const long n = std::lround(q);
  if (std::abs(q - static_cast<double>(n)) > 1e-9) {
    throw OutOfRangeError("LUT step must divide 180 degrees evenly");
  }
  return static_cast<int>(n) + 1;
}

double grid_angle(int i, double step_deg) { return -90.0 + step_deg * i; }

void check_header(const LutHeader& h) {
  axis_count(h.step_deg);
  if (!(h.tau > 0.0) || !(h.dt > 0.0) || h.dt > h.tau * (1.0 + 1e-12)) {
    throw OutOfRangeError("LUT timing requires tau > 0 and 0 < dt <= tau");
  }
  if (!(h.h_ref > 0.0) || !(h.speed > 0.0)) {
    throw OutOfRangeError("LUT reference altitude and speed must be positive");
  }
}

CameraModel with_theta(const CameraModel& cam, double theta_deg) {
  CameraModel c = cam;
  c.theta_deg = theta_deg;
  return c;
}

// World velocity is z-up; the swept model takes a descent-positive v_z.
CoverageTrace swept(const Vec3& dir, const CameraModel& cam, const LutHeader& h) {
  const Vec3 v = dir * h.speed;
  return swept_footprints({v.x, v.y, -v.z}, h.h_ref, h.tau, h.dt, cam);
}

std::vector<Rect2> rects(const CoverageTrace& t) {
  std::vector<Rect2> out;
  for (const Footprint& f : t.footprints()) {
    if (!f.valid || f.side <= 0.0) continue;
    const double r = 0.5 * f.side;
    out.push_back({{f.center.x - r, f.center.y - r}, {f.center.x + r, f.center.y + r}});
  }
  return out;
}

// |∪a ∩ ∪b| on the grid of all rectangle edges.
double rect_union_intersection(const std::vector<Rect2>& a, const std::vector<Rect2>& b) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto* set : {&a, &b}) {
    for (const Rect2& r : *set) {
      xs.push_back(r.min.x);
      xs.push_back(r.max.x);
      ys.push_back(r.min.y);
      ys.push_back(r.max.y);
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  auto inside = [](const std::vector<Rect2>& set, double x, double y) {
    for (const Rect2& r : set) {
      if (x > r.min.x && x < r.max.x && y > r.min.y && y < r.max.y) return true;
    }
    return false;
  };
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double cx = 0.5 * (xs[i] + xs[i + 1]);
    double column = 0.0;
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double cy = 0.5 * (ys[j] + ys[j + 1]);
      if (inside(a, cx, cy) && inside(b, cx, cy)) {
        column += ys[j + 1] - ys[j];
      }
    }
    area += column * (xs[i + 1] - xs[i]);
  }
  return area;
}

}  // namespace

double lut_overlap(const Vec3& dir, const CameraModel& cam, const LutHeader& h) {
  const CameraModel c = with_theta(cam, h.theta_deg);
  return rect_union_intersection(rects(swept({1.0, 0.0, 0.0}, c, h)), rects(swept(dir, c, h)));
}

double lut_overlap_clipped(const Vec3& dir, const CameraModel& cam, const LutHeader& h) {
  const CameraModel c = with_theta(cam, h.theta_deg);
  const std::vector<Poly2> a = swept({1.0, 0.0, 0.0}, c, h).polygons(false);
  const std::vector<Poly2> b = swept(dir, c, h).polygons(false);
  return intersection_area(a, b);
}

LookupTable::LookupTable(LutHeader header, std::vector<LutEntry> entries)
    : header_(header), entries_(std::move(entries)) {
  n_ = axis_count(header_.step_deg);
  if (entries_.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_)) {
    throw ValidationError("LUT has " + std::to_string(entries_.size()) + " rows, expected " +
                          std::to_string(n_ * n_));
  }
  by_overlap_.resize(entries_.size());
  std::iota(by_overlap_.begin(), by_overlap_.end(), 0U);
  by_deviation_ = by_overlap_;
  // Rank on overlap rounded to 12 digits so rounding noise cannot reorder
  // geometric ties; ties go to the smaller deviation.
  double top = 0.0;
  for (const LutEntry& e : entries_) top = std::max(top, e.overlap);
  std::vector<double> key(entries_.size());
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    key[k] = top > 0.0 ? std::round(entries_[k].overlap / top * 1e12) : 0.0;
  }
  std::stable_sort(by_overlap_.begin(), by_overlap_.end(), [&](std::uint32_t i, std::uint32_t j) {
    if (key[i] != key[j]) return key[i] > key[j];
    return entries_[i].deviation < entries_[j].deviation;
  });
  rank_.resize(entries_.size());
  for (std::size_t k = 0; k < by_overlap_.size(); ++k) rank_[by_overlap_[k]] = static_cast<std::uint32_t>(k);
  std::stable_sort(by_deviation_.begin(), by_deviation_.end(), [&](std::uint32_t i, std::uint32_t j) {
    return entries_[i].deviation < entries_[j].deviation;
  });
}

std::size_t LookupTable::nearest(const Vec3& dir) const {
  const Vec3 d = normalized(dir);
  const double step = header_.step_deg;
  const double alpha = rad2deg(std::asin(std::clamp(d.y, -1.0, 1.0)));
  double beta = 0.0;
  if (std::hypot(d.x, d.z) > 1e-12) {
    beta = std::clamp(rad2deg(std::atan2(-d.z, d.x)), -90.0, 90.0);
  }
  const int ia0 = static_cast<int>(std::lround((alpha + 90.0) / step));
  const int ib0 = static_cast<int>(std::lround((beta + 90.0) / step));
  std::size_t best = 0;
  double best_dot = -2.0;
  for (int ia = std::max(0, ia0 - 2); ia <= std::min(n_ - 1, ia0 + 2); ++ia) {
    for (int ib = std::max(0, ib0 - 2); ib <= std::min(n_ - 1, ib0 + 2); ++ib) {
      const std::size_t k = static_cast<std::size_t>(ia * n_ + ib);
      const double c = dot(entries_[k].v, d);
      if (c > best_dot + 1e-15) {
        best_dot = c;
        best = k;
      }
    }
  }
  return best;
}

LookupTable build_lut(const CameraModel& cam, const LutHeader& h, int workers) {
  check_header(h);
  const int n = axis_count(h.step_deg);
  std::vector<LutEntry> rows(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  auto body = [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t k = r.begin(); k != r.end(); ++k) {
      const int ia = static_cast<int>(k) / n;
      const int ib = static_cast<int>(k) % n;
      LutEntry& e = rows[k];
      e.alpha = grid_angle(ia, h.step_deg);
      e.beta = grid_angle(ib, h.step_deg);
      e.v = lut_direction(e.alpha, e.beta);
      e.deviation = distance(e.v, {1.0, 0.0, 0.0});
      e.overlap = lut_overlap(e.v, cam, h);
    }
  };
  if (workers > 0) {
    tbb::task_arena arena(workers);
    arena.execute([&] { tbb::parallel_for(tbb::blocked_range<std::size_t>(0, rows.size(), 64), body); });
  } else {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, rows.size(), 64), body);
  }
  return LookupTable(h, std::move(rows));
}

void write_lut(const LookupTable& lut, const std::filesystem::path& out) {
  std::FILE* f = std::fopen(out.string().c_str(), "w");
  if (f == nullptr) {
    throw std::runtime_error("cannot write " + out.string());
  }
  const LutHeader& h = lut.header();
  std::fprintf(f, "# lswarm lookup table\n");
  std::fprintf(f, "theta_deg %.17g\nh_ref %.17g\ntau %.17g\ndt %.17g\nstep_deg %.17g\nspeed %.17g\nrows %zu\n",
               h.theta_deg, h.h_ref, h.tau, h.dt, h.step_deg, h.speed, lut.size());
  std::fprintf(f, "alpha,beta,v_alpha_beta,deviation,overlap\n");
  for (const LutEntry& e : lut.entries()) {
    std::fprintf(f, "%.17g,%.17g,%.17g %.17g %.17g,%.17g,%.17g\n", e.alpha, e.beta, e.v.x, e.v.y, e.v.z,
                 e.deviation, e.overlap);
  }
  const bool bad = std::ferror(f) != 0;
  if (std::fclose(f) != 0 || bad) {
    throw std::runtime_error("write failed for " + out.string());
  }
}

LookupTable read_lut(const std::filesystem::path& in) {
  std::ifstream f(in);
  if (!f) {
    throw ParseError("cannot open " + in.string());
  }
  LutHeader h;
  std::size_t rows = 0;
  std::string line;
  std::getline(f, line);
  if (line.rfind("# lswarm lookup table", 0) != 0) {
    throw ParseError(in.string() + ": not a lookup table");
  }
  const std::pair<const char*, double*> fields[] = {{"theta_deg", &h.theta_deg}, {"h_ref", &h.h_ref},
                                                    {"tau", &h.tau},             {"dt", &h.dt},
                                                    {"step_deg", &h.step_deg},   {"speed", &h.speed}};
  for (const auto& [key, dst] : fields) {
    std::string k;
    if (!std::getline(f, line) || !(std::istringstream(line) >> k >> *dst) || k != key) {
      throw ParseError(in.string() + ": expected header field " + key);
    }
  }
  {
    std::string k;
    if (!std::getline(f, line) || !(std::istringstream(line) >> k >> rows) || k != "rows") {
      throw ParseError(in.string() + ": expected row count");
    }
  }
  std::getline(f, line);
  if (line != "alpha,beta,v_alpha_beta,deviation,overlap") {
    throw ParseError(in.string() + ": bad column header");
  }
  try {
    check_header(h);
  } catch (const Error& e) {
    throw ParseError(in.string() + ": " + e.what());
  }
  std::vector<LutEntry> entries;
  entries.reserve(rows);
  std::size_t lineno = 9;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    LutEntry e;
    std::string vcol;
    std::istringstream ss(line);
    std::string cols[5];
    int c = 0;
    while (c < 5 && std::getline(ss, cols[c], ',')) ++c;
    std::string extra;
    if (c != 5 || std::getline(ss, extra)) {
      throw ParseError(in.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    }
    try {
      std::size_t used = 0;
      e.alpha = std::stod(cols[0], &used);
      e.beta = std::stod(cols[1]);
      std::istringstream vs(cols[2]);
      if (!(vs >> e.v.x >> e.v.y >> e.v.z)) throw std::invalid_argument("v");
      e.deviation = std::stod(cols[3]);
      e.overlap = std::stod(cols[4]);
    } catch (const std::exception&) {
      throw ParseError(in.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    entries.push_back(e);
  }
  if (entries.size() != rows) {
    throw ParseError(in.string() + ": header says " + std::to_string(rows) + " rows, found " +
                     std::to_string(entries.size()));
  }
  try {
    return LookupTable(h, std::move(entries));
  } catch (const ValidationError& e) {
    throw ParseError(in.string() + ": " + e.what());
  }
}

LutCheck verify_lut(const LookupTable& lut, const CameraModel& cam, std::size_t samples, std::uint64_t seed,
                    double rel_tol) {
  LutCheck out;
  const LutHeader& h = lut.header();
  const int n = lut.per_axis();
  out.rows_ok = lut.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  out.geometry_ok = true;
  for (int ia = 0; ia < n && out.rows_ok; ++ia) {
    for (int ib = 0; ib < n; ++ib) {
      const LutEntry& e = lut.at(ia, ib);
      if (std::abs(e.alpha - grid_angle(ia, h.step_deg)) > 1e-9 ||
          std::abs(e.beta - grid_angle(ib, h.step_deg)) > 1e-9) {
        out.rows_ok = false;
        out.problems.push_back("row (" + std::to_string(ia) + "," + std::to_string(ib) + ") off the angle grid");
        break;
      }
      const Vec3 v = lut_direction(e.alpha, e.beta);
      if (distance(v, e.v) > 1e-12 || std::abs(e.deviation - distance(v, {1.0, 0.0, 0.0})) > 1e-12 ||
          !(e.overlap >= 0.0)) {
        if (out.geometry_ok) {
          out.problems.push_back("row alpha=" + std::to_string(e.alpha) + " beta=" + std::to_string(e.beta) +
                                 " has a wrong direction, deviation or overlap sign");
        }
        out.geometry_ok = false;
      }
    }
  }
  if (!out.rows_ok) {
    return out;
  }
  const int mid = (n - 1) / 2;
  const LutEntry& origin = lut.at(mid, mid);
  double other_max = 0.0;
  for (std::size_t k = 0; k < lut.size(); ++k) {
    if (k != static_cast<std::size_t>(mid * n + mid)) other_max = std::max(other_max, lut.entries()[k].overlap);
  }
  out.origin_ok = origin.deviation == 0.0 && other_max <= origin.overlap * (1.0 + 1e-12);
  out.unique_max = other_max < origin.overlap * (1.0 - 1e-9);
  if (!out.origin_ok) {
    out.problems.push_back("entry (0,0) is not the overlap maximum");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, lut.size() - 1);
  std::vector<std::size_t> rows{static_cast<std::size_t>(mid * n + mid)};
  while (rows.size() < samples) rows.push_back(pick(rng));
  rows.resize(std::min(rows.size(), samples));
  out.samples = rows.size();
  out.samples_ok = true;
  for (std::size_t k : rows) {
    const LutEntry& e = lut.entries()[k];
    const double ref = lut_overlap_clipped(lut_direction(e.alpha, e.beta), cam, h);
    const double err = std::abs(e.overlap - ref) / std::max(ref, 1e-12);
    out.worst_rel_err = std::max(out.worst_rel_err, err);
    if (err > rel_tol) {
      out.samples_ok = false;
      out.problems.push_back("row alpha=" + std::to_string(e.alpha) + " beta=" + std::to_string(e.beta) +
                             " overlap " + std::to_string(e.overlap) + " vs recomputed " + std::to_string(ref));
    }
  }
  return out;
}

}  // namespace lswarm
