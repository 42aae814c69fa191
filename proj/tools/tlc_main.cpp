// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tlc/cli.hpp"
#include "tlc/common.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out_dir;

  tlc::config::RunConfig load() const {
    std::vector<std::string> all = overrides;
    if (seed >= 0) all.push_back("seed=" + std::to_string(seed));
    if (!out_dir.empty()) all.push_back("out_dir=\"" + out_dir + "\"");
    return tlc::config::load_run_config(config_path, all);
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run config (TOML)")->required();
  cmd->add_option("--override", args.overrides, "key=value config override (repeatable)");
  cmd->add_option("--seed", args.seed, "override the global seed");
  cmd->add_option("--out", args.out_dir, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collective-variable discovery and enhanced-sampling workbench"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<std::string> report_runs;

  auto* simulate = app.add_subcommand("simulate", "unbiased basin-seeded trajectories");
  auto* pairs = app.add_subcommand("make-pairs", "time-lagged pair extraction");
  auto* train = app.add_subcommand("train", "fit the configured CV model");
  auto* calibrate = app.add_subcommand("calibrate", "recalibrate a trained CV to [-1,1]");
  auto* project = app.add_subcommand("project", "CV landscape, projections, sensitivity");
  auto* smd = app.add_subcommand("smd", "steered MD with a k sweep");
  auto* opes = app.add_subcommand("opes", "adaptive-bias sampling run");
  auto* fes = app.add_subcommand("fes", "reweighted free energy and delta F");
  auto* report = app.add_subcommand("report", "aggregate runs into mean/std tables");
  for (auto* cmd : {simulate, pairs, train, calibrate, project, smd, opes, fes, report})
    add_common(cmd, args);
  report->add_option("runs", report_runs, "run directories to aggregate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto cfg = args.load();
    if (simulate->parsed()) tlc::cli::cmd_simulate(cfg);
    if (pairs->parsed()) tlc::cli::cmd_make_pairs(cfg);
    if (train->parsed()) tlc::cli::cmd_train(cfg);
    if (calibrate->parsed()) tlc::cli::cmd_calibrate(cfg);
    if (project->parsed()) tlc::cli::cmd_project(cfg);
    if (smd->parsed()) tlc::cli::cmd_smd(cfg);
    if (opes->parsed()) tlc::cli::cmd_opes(cfg);
    if (fes->parsed()) tlc::cli::cmd_fes(cfg);
    if (report->parsed()) tlc::cli::cmd_report(cfg, report_runs);
  } catch (const tlc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tlc::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tlc::DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tlc::NumericsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
