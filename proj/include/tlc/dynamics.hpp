// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tlc/common.hpp"
#include "tlc/rng.hpp"
#include "tlc/systems.hpp"

namespace tlc::dynamics {

struct LangevinParams {
  double dt = 1e-3;
  double gamma = 1.0;
  double temperature = 1.0;  // k_B T with k_B = 1
  std::vector<double> masses{1.0};
  std::uint64_t seed = 0;
};

struct MdState {
  Configuration x;
  std::vector<double> v;
  std::int64_t t = 0;
};

// Physical force callback: writes -grad U into f (resized by caller contract).
using ForceFn = std::function<void(const Configuration& x, Configuration& f)>;
// Bias force hook; adds its contribution into f. The step index makes SMD's
// moving restraint and OPES's adaptive bias share one interface.
using BiasForceFn = std::function<void(const Configuration& x, std::int64_t step, Configuration& f)>;

struct Trajectory {
  std::vector<Configuration> frames;
  std::int64_t record_stride = 1;
  LangevinParams params;
  int n_particles = 0;
  int spatial_dim = 0;
  // Optional per-frame annotations; empty or frames.size() long.
  std::vector<double> energy;
  std::vector<double> bias;
  std::vector<double> cv;
};

// One BAOAB step: half-kick, half-drift, exact Ornstein-Uhlenbeck velocity
// update with factor e^{-gamma dt} and noise stddev sqrt((1 - e^{-2 gamma dt}) kT/m),
// half-drift, half-kick. Forces are evaluated fresh at both kicks; the bias
// sees the same step index within one step.
void step(MdState& state, const LangevinParams& params, const ForceFn& force_fn,
          const BiasForceFn* bias_fn, Rng& rng);

// Maxwell-Boltzmann velocities at params.temperature.
std::vector<double> thermal_velocities(const LangevinParams& params, int spatial_dim, Rng& rng);

struct RunOptions {
  bool record_energy = false;
  const BiasForceFn* bias = nullptr;
};

// n_steps of BAOAB from init with thermalized initial velocities, recording
// every record_stride including frame 0. Deterministic per params.seed.
Trajectory run(const systems::SystemSpec& sys, const LangevinParams& params,
               const Configuration& init, std::int64_t n_steps, std::int64_t record_stride,
               const RunOptions& opts = {});

// Same, with a caller-supplied force field (for non-SystemSpec potentials).
Trajectory run_custom(const ForceFn& force_fn, int n_particles, int spatial_dim,
                      const LangevinParams& params, const Configuration& init,
                      std::int64_t n_steps, std::int64_t record_stride,
                      const RunOptions& opts = {});

struct PairDataset {
  std::vector<Configuration> x_t;
  std::vector<Configuration> x_tau;
  std::int64_t tau_steps = 0;
};

// Time-lagged pairs (x_i, x_{i+lag}) pooled over trajectories, with pairs
// whose basin labels differ dropped when exclude_transitions is set, then
// uniformly subsampled to max_pairs.
PairDataset extract_pairs(const std::vector<Trajectory>& trajs, const systems::SystemSpec& sys,
                          std::int64_t tau_steps, bool exclude_transitions, std::size_t max_pairs,
                          Rng& rng);

// Binary trajectory file: magic "TLCTRJ1", little-endian header
// (u32 version, u32 n_particles, u32 spatial_dim, u64 n_frames, f64 dt,
// u64 record_stride, u64 seed), then frames as contiguous f64.
void write_trajectory(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory(const std::string& path);

// One frame per row: frame index, step, coordinates, then any annotations.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

}  // namespace tlc::dynamics
