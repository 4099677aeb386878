#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lswarm/sim.hpp"

namespace lswarm::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Runs `fn`, reporting library errors on `err`. Parse, validation, pattern
/// and altitude errors give kValidation, anything else kRuntime.
int guarded(const std::function<int()>& fn, std::ostream& err);

struct PlanArgs {
  std::filesystem::path model;
  std::filesystem::path camera;  ///< empty: default camera
  int agents = 1;
  double clearance = 2.0;
  double row_factor = 1.0;
  double margin = 0.5;
  std::filesystem::path out;  ///< empty: no file
};

/// Prints planning time, coverage gap and path lengths.
int cmd_plan(const PlanArgs& args, std::ostream& out);

struct LutArgs {
  std::filesystem::path camera;
  double tau = 2.0;
  double dt = 0.2;
  double step_deg = 1.0;
  double h_ref = 5.0;
  int workers = 0;
  std::filesystem::path out;
};

int cmd_lut_build(const LutArgs& args, std::ostream& out);

struct LutVerifyArgs {
  std::filesystem::path camera;
  std::filesystem::path lut;
  std::size_t samples = 50;
  std::uint64_t seed = 1;
};

/// kValidation when the file fails any gating check.
int cmd_lut_verify(const LutVerifyArgs& args, std::ostream& out);

struct RunArgs {
  std::filesystem::path scenario;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir;  ///< empty: nothing written
  int workers = 0;
};

struct RunReport {
  std::string scenario_id;
  AvoidMode mode = AvoidMode::LSwarm;
  std::uint64_t seed = 0;
  MetricsRecord metrics;
  std::vector<std::filesystem::path> files;
};

RunReport run_scenario(const RunArgs& args);
int cmd_run(const RunArgs& args, std::ostream& out);

/// "obstacles=10,25,40" or "agents:10,25,50".
struct Sweep {
  std::string key;
  std::vector<int> values;
};
/// Throws ValidationError.
Sweep parse_sweep(const std::string& text);

struct CompareArgs {
  std::filesystem::path scenario;
  std::string sweep;
  int seeds = 1;            ///< runs per point and mode, seeds seed .. seed+seeds-1
  std::uint64_t seed = 1;
  int workers = 0;
  std::filesystem::path out;  ///< CSV, empty: stdout only
};

struct ComparePoint {
  int value = 0;
  double orca = 0.0;  ///< mean resolution-constrained overlap ratio
  double lswarm = 0.0;
  double orca_step_ms = 0.0;  ///< mean wall-clock per step
  double lswarm_step_ms = 0.0;
};

/// Scenario with the sweep value applied. Agent sweeps need a planned
/// scenario (no explicit paths).
Scenario sweep_point(const Scenario& base, const Sweep& sweep, int value);

std::vector<ComparePoint> compare(const Scenario& base, const Sweep& sweep, int seeds, std::uint64_t seed,
                                  int workers);
int cmd_compare(const CompareArgs& args, std::ostream& out);

}  // namespace lswarm::cli
