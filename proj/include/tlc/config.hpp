// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlc/cvmodels.hpp"
#include "tlc/dynamics.hpp"
#include "tlc/systems.hpp"

namespace tlc::config {

struct DataPlan {
  int n_trajs_per_basin = 5;
  std::int64_t n_steps = 40000;
  std::int64_t record_stride = 4;
  std::int64_t tau_steps = 40;  // default lag = 10 recorded frames
  bool exclude_transitions = true;
  std::int64_t max_pairs = 20000;
};

struct ModelSection {
  std::string kind = "tlc";  // tlc | tae | vde | deeptda | tica | lda
  cvmodels::InputMode input_mode = cvmodels::InputMode::AlignedCoords;
  std::vector<int> hidden{64, 64};
  std::vector<int> flow_hidden{64, 64};
  double lr = 1e-3;
  int batch_size = 256;
  int n_iters = 8000;
  double lambda = 0.1;  // TLC autocorrelation weight; 0 reproduces the ablation
  double sigma = 0.05;
  int ode_steps = 100;
  double beta_kl = 1e-3;
  double lambda_ac = 1.0;
  double reg = 1e-3;
};

struct SmdSection {
  double k_min = 2.0;
  double k_max = 20.0;
  int k_count = 10;
  std::int64_t horizon_steps = 3000;
  int n_replicas = 64;
  std::int64_t record_stride = 10;
  double hit_threshold = 0.2;
  double energy_cap = 0.0;  // 0: derive from a k=0 baseline, max energy + 2 kT
  std::string cv = "encoder";  // encoder | ground_truth
};

struct OpesSection {
  std::int64_t pace = 500;
  double sigma = 0.1;
  double barrier = 10.0;
  double gamma = 0.0;  // 0: beta * barrier
  std::int64_t record_stride = 500;
  std::int64_t total_steps = 200000;
  std::string cv = "encoder";
  double grid_lo = -3.0;
  double grid_hi = 3.0;
  int grid_bins = 2048;
};

struct FesSection {
  int n_bins = 64;
  double burn_in_fraction = 0.15;
  std::int64_t checkpoint_stride = 50;  // frames per Delta F update
  double basin_split = 0.0;
  bool has_reference = false;
  double reference = 0.0;
};

struct RunConfig {
  systems::SystemSpec system;
  dynamics::LangevinParams langevin;
  DataPlan data;
  ModelSection model;
  SmdSection smd;
  OpesSection opes;
  FesSection fes;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string config_hash;  // fnv-1a of the config text plus overrides
};

// Parse + strict schema validation: unknown keys are rejected with their line.
RunConfig run_config_from_text(const std::string& text,
                               const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

}  // namespace tlc::config
