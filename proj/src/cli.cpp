#include "lswarm/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <tbb/info.h>

#include "lswarm/errors.hpp"
#include "lswarm/lawnmower.hpp"
#include "lswarm/lut.hpp"

namespace lswarm::cli {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int effective_workers(int workers) {
  return workers > 0 ? workers : tbb::info::default_concurrency();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + p.string());
  }
  out << text;
  if (!out) {
    throw Error("write failed for " + p.string());
  }
}

double mean_step_ms(const MetricsRecord& m) {
  if (m.step_seconds.empty()) return 0.0;
  double s = 0.0;
  for (double x : m.step_seconds) s += x;
  return 1e3 * s / static_cast<double>(m.step_seconds.size());
}

}  // namespace

int guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const UnknownPatternError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const InfeasibleAltitudeError& e) {
    err << "error: infeasible altitude: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}

int cmd_plan(const PlanArgs& args, std::ostream& out) {
  const UrbanModel model = load_model(args.model);
  const CameraModel cam = args.camera.empty() ? CameraModel{} : load_camera(args.camera);
  cam.validate();
  PlanConfig cfg;
  cfg.agents = args.agents;
  cfg.clearance = args.clearance;
  cfg.row_factor = args.row_factor;
  cfg.margin = args.margin;
  cfg.validate();

  const auto t0 = Clock::now();
  const std::vector<WaypointPath> paths = plan(model, cam, cfg);
  const double plan_ms = ms_since(t0);
  const double gap = verify_coverage(paths, model, cam);

  out << "model " << model.name() << ", " << model.buildings().size() << " buildings\n";
  out << "altitude h* " << fmt("%.3f", optimal_altitude(cam)) << " m, footprint side "
      << fmt("%.3f", footprint_side(optimal_altitude(cam), cam)) << " m\n";
  out << "planning time " << fmt("%.3f", plan_ms) << " ms (1 worker)\n";
  out << "uncovered fraction " << fmt("%.6f", gap) << '\n';
  out << "agent,waypoints,length_m\n";
  for (const WaypointPath& p : paths) {
    out << p.agent << ',' << p.waypoints.size() << ',' << fmt("%.3f", p.length()) << '\n';
  }
  if (!args.out.empty()) {
    write_waypoints(paths, args.out);
    out << "wrote " << args.out.string() << '\n';
  }
  return kOk;
}

int cmd_lut_build(const LutArgs& args, std::ostream& out) {
  const CameraModel cam = load_camera(args.camera);
  LutHeader h;
  h.theta_deg = cam.theta_deg;
  h.tau = args.tau;
  h.dt = args.dt;
  h.step_deg = args.step_deg;
  h.h_ref = args.h_ref;
  const auto t0 = Clock::now();
  const LookupTable lut = build_lut(cam, h, args.workers);
  const double build_ms = ms_since(t0);
  out << "rows " << lut.size() << " (" << lut.per_axis() << " per axis)\n";
  out << "build time " << fmt("%.1f", build_ms) << " ms, workers " << effective_workers(args.workers) << '\n';
  if (!args.out.empty()) {
    write_lut(lut, args.out);
    out << "wrote " << args.out.string() << '\n';
  }
  return kOk;
}

int cmd_lut_verify(const LutVerifyArgs& args, std::ostream& out) {
  const CameraModel cam = load_camera(args.camera);
  const LookupTable lut = read_lut(args.lut);
  const LutCheck c = verify_lut(lut, cam, args.samples, args.seed);
  auto line = [&](const char* what, bool ok) { out << what << ' ' << (ok ? "ok" : "FAILED") << '\n'; };
  out << "rows " << lut.size() << '\n';
  line("grid", c.rows_ok);
  line("geometry", c.geometry_ok);
  line("origin", c.origin_ok);
  line("samples", c.samples_ok);
  out << "unique maximum " << (c.unique_max ? "yes" : "no") << " (not gating)\n";
  out << "checked " << c.samples << " rows, worst relative error " << fmt("%.3g", c.worst_rel_err) << '\n';
  for (const std::string& p : c.problems) out << "  " << p << '\n';
  return c.ok() ? kOk : kValidation;
}

RunReport run_scenario(const RunArgs& args) {
  Scenario sc = load_scenario(args.scenario);
  if (args.mode) sc.mode = parse_mode(*args.mode);
  if (args.seed) sc.seed = *args.seed;
  sc.validate();
  RunOptions o;
  o.workers = args.workers;
  o.record_trace = !args.out_dir.empty();
  RunResult r = run(sc, o);

  RunReport rep;
  rep.scenario_id = sc.id;
  rep.mode = sc.mode;
  rep.seed = sc.seed;
  if (!args.out_dir.empty()) {
    std::filesystem::create_directories(args.out_dir);
    const std::string stem = sc.id + "-" + mode_name(sc.mode) + "-s" + std::to_string(sc.seed);
    const auto trace = args.out_dir / (stem + ".trace.csv");
    const auto metrics = args.out_dir / (stem + ".metrics.json");
    write_trace(r.trace, trace);
    nlohmann::json j = metrics_to_json(r.metrics);
    j["scenario"] = sc.id;
    j["mode"] = mode_name(sc.mode);
    j["seed"] = sc.seed;
    j["workers"] = effective_workers(args.workers);
    write_text(metrics, j.dump(2) + "\n");
    rep.files = {trace, metrics};
  }
  rep.metrics = std::move(r.metrics);
  return rep;
}

int cmd_run(const RunArgs& args, std::ostream& out) {
  const RunReport rep = run_scenario(args);
  const MetricsRecord& m = rep.metrics;
  out << "scenario " << rep.scenario_id << ", mode " << mode_name(rep.mode) << ", seed " << rep.seed
      << ", workers " << effective_workers(args.workers) << '\n';
  auto row = [&](const char* k, const std::string& v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "  %-28s", k);
    out << buf << v << '\n';
  };
  row("overlap_ratio", fmt("%.4f", m.overlap_ratio));
  row("overlap_ratio_resolution", fmt("%.4f", m.overlap_ratio_resolution));
  row("coverage_loss", fmt("%.4f", m.coverage_loss));
  row("uncovered_fraction", fmt("%.4f", m.uncovered_fraction));
  auto dist = [](double d) { return d >= 1e8 ? std::string("none") : fmt("%.3f", d); };
  row("min_separation", dist(m.min_separation));
  row("min_building_clearance", dist(m.min_building_clearance));
  row("agent_agent_collisions", std::to_string(m.agent_agent_collisions));
  row("agent_building_collisions", std::to_string(m.agent_building_collisions));
  row("agent_obstacle_collisions", std::to_string(m.agent_obstacle_collisions));
  row("gsd_violations", std::to_string(m.gsd_violations));
  row("steps", std::to_string(m.steps));
  row("sim_time_s", fmt("%.2f", m.sim_time));
  row("step_ms_mean", fmt("%.3f", mean_step_ms(m)));
  for (const auto& f : rep.files) out << "wrote " << f.string() << '\n';
  return kOk;
}

Sweep parse_sweep(const std::string& text) {
  const auto sep = text.find_first_of("=:");
  if (sep == std::string::npos) {
    throw ValidationError("sweep must look like obstacles=10,25,40 or agents=10,50");
  }
  Sweep s;
  s.key = text.substr(0, sep);
  if (s.key != "obstacles" && s.key != "agents") {
    throw ValidationError("unknown sweep key '" + s.key + "' (obstacles or agents)");
  }
  std::istringstream in(text.substr(sep + 1));
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 0 || (s.key == "agents" && v < 1)) {
      throw ValidationError("bad sweep value '" + item + "'");
    }
    s.values.push_back(v);
  }
  if (s.values.empty()) {
    throw ValidationError("sweep has no values");
  }
  return s;
}

Scenario sweep_point(const Scenario& base, const Sweep& sweep, int value) {
  Scenario sc = base;
  if (sweep.key == "obstacles") {
    sc.obstacles.count = value;
  } else {
    if (!sc.agents.paths.empty()) {
      throw ValidationError("agent sweeps need a planned scenario (no explicit paths)");
    }
    sc.agents.count = value;
  }
  sc.validate();
  return sc;
}

std::vector<ComparePoint> compare(const Scenario& base, const Sweep& sweep, int seeds, std::uint64_t seed,
                                  int workers) {
  if (seeds < 1) {
    throw ValidationError("seeds must be at least 1");
  }
  std::vector<ComparePoint> out;
  for (int value : sweep.values) {
    ComparePoint pt;
    pt.value = value;
    for (AvoidMode mode : {AvoidMode::Orca, AvoidMode::LSwarm}) {
      double ratio = 0.0;
      double step_ms = 0.0;
      for (int k = 0; k < seeds; ++k) {
        Scenario sc = sweep_point(base, sweep, value);
        sc.mode = mode;
        sc.seed = seed + static_cast<std::uint64_t>(k);
        RunOptions o;
        o.workers = workers;
        o.record_trace = false;
        const MetricsRecord m = run(sc, o).metrics;
        ratio += m.overlap_ratio_resolution;
        step_ms += mean_step_ms(m);
      }
      (mode == AvoidMode::Orca ? pt.orca : pt.lswarm) = ratio / seeds;
      (mode == AvoidMode::Orca ? pt.orca_step_ms : pt.lswarm_step_ms) = step_ms / seeds;
    }
    out.push_back(pt);
  }
  return out;
}

int cmd_compare(const CompareArgs& args, std::ostream& out) {
  const Scenario base = load_scenario(args.scenario);
  const Sweep sweep = parse_sweep(args.sweep);
  const std::vector<ComparePoint> pts = compare(base, sweep, args.seeds, args.seed, args.workers);
  std::string csv = sweep.key + ",orca_ratio,lswarm_ratio,orca_step_ms,lswarm_step_ms\n";
  for (const ComparePoint& p : pts) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.4f,%.4f\n", p.value, p.orca, p.lswarm, p.orca_step_ms,
                  p.lswarm_step_ms);
    csv += buf;
  }
  out << "scenario " << base.id << ", " << args.seeds << " seed(s) from " << args.seed << ", workers "
      << effective_workers(args.workers) << '\n'
      << csv;
  if (!args.out.empty()) {
    write_text(args.out, csv);
    out << "wrote " << args.out.string() << '\n';
  }
  return kOk;
}

}  // namespace lswarm::cli
