#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lswarm/cli.hpp"

namespace cli = lswarm::cli;

int main(int argc, char** argv) {
  CLI::App app{"LSwarm coverage-constrained swarm avoidance: planning, lookup tables, simulation"};
  app.require_subcommand(1);
  int code = cli::kOk;

  cli::PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "lawnmower waypoints for a model");
  plan_cmd->add_option("--model", plan.model, "urban model JSON")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--camera", plan.camera, "camera JSON")->check(CLI::ExistingFile);
  plan_cmd->add_option("--agents", plan.agents, "number of agents");
  plan_cmd->add_option("--clearance", plan.clearance, "height above overflown buildings, m");
  plan_cmd->add_option("--row-factor", plan.row_factor, "row spacing as a fraction of the footprint");
  plan_cmd->add_option("--margin", plan.margin, "lateral keep-out, m");
  plan_cmd->add_option("--out", plan.out, "waypoint CSV");
  plan_cmd->callback([&] { code = cli::guarded([&] { return cli::cmd_plan(plan, std::cout); }, std::cerr); });

  auto* lut_cmd = app.add_subcommand("lut", "coverage-overlap lookup table");
  lut_cmd->require_subcommand(1);
  cli::LutArgs build;
  auto* build_cmd = lut_cmd->add_subcommand("build", "build a table");
  build_cmd->add_option("--camera", build.camera, "camera JSON")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--step-deg", build.step_deg, "angular step, degrees");
  build_cmd->add_option("--tau", build.tau, "horizon, s");
  build_cmd->add_option("--dt", build.dt, "sampling step, s");
  build_cmd->add_option("--h-ref", build.h_ref, "reference altitude, m");
  build_cmd->add_option("--workers", build.workers, "threads, 0 for all");
  build_cmd->add_option("--out", build.out, "table file")->required();
  build_cmd->callback([&] { code = cli::guarded([&] { return cli::cmd_lut_build(build, std::cout); }, std::cerr); });

  cli::LutVerifyArgs verify;
  auto* verify_cmd = lut_cmd->add_subcommand("verify", "recompute random rows of a table");
  verify_cmd->add_option("--camera", verify.camera, "camera JSON")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--lut", verify.lut, "table file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--samples", verify.samples, "rows to recompute");
  verify_cmd->add_option("--seed", verify.seed, "row sampling seed");
  verify_cmd->callback(
      [&] { code = cli::guarded([&] { return cli::cmd_lut_verify(verify, std::cout); }, std::cerr); });

  cli::RunArgs run;
  std::string run_mode;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "simulate one scenario");
  run_cmd->add_option("--scenario", run.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  auto* mode_opt = run_cmd->add_option("--mode", run_mode, "orca or lswarm");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "random seed");
  run_cmd->add_option("--out", run.out_dir, "directory for trace and metrics");
  run_cmd->add_option("--workers", run.workers, "threads, 0 for all");
  run_cmd->callback([&] {
    if (mode_opt->count() > 0) run.mode = run_mode;
    if (seed_opt->count() > 0) run.seed = run_seed;
    code = cli::guarded([&] { return cli::cmd_run(run, std::cout); }, std::cerr);
  });

  cli::CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "ORCA against LSwarm over a sweep");
  cmp_cmd->add_option("--scenario", cmp.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--sweep", cmp.sweep, "obstacles=10,25,40 or agents=10,50")->required();
  cmp_cmd->add_option("--seeds", cmp.seeds, "runs per point and mode");
  cmp_cmd->add_option("--seed", cmp.seed, "first seed");
  cmp_cmd->add_option("--workers", cmp.workers, "threads, 0 for all");
  cmp_cmd->add_option("--out", cmp.out, "CSV file");
  cmp_cmd->callback([&] { code = cli::guarded([&] { return cli::cmd_compare(cmp, std::cout); }, std::cerr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kValidation;
  }
  return code;
}
