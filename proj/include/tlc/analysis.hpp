// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tlc/common.hpp"
#include "tlc/cvmodels.hpp"
#include "tlc/dynamics.hpp"
#include "tlc/systems.hpp"

namespace tlc::analysis {

struct ReplicaMetrics {
  int replica = 0;
  double rmsd_min = 0.0;  // min over frames of Kabsch rmsd to the target
  bool hit = false;
  double e_max = 0.0;  // max potential energy along the path
  bool diverged = false;
};

struct PathMetrics {
  double rmsd_mean = 0.0;
  double thp_percent = 0.0;
  std::optional<double> ets_mean;  // over hitting replicas; absent when none hit
  std::optional<double> ets_std;
  std::vector<ReplicaMetrics> replicas;
};

// Per-replica path quality against a target configuration. A replica hits
// when some frame's basin coordinate comes within hit_threshold of the
// target's. Requires potential-energy annotations.
PathMetrics path_metrics(const std::vector<dynamics::Trajectory>& trajs,
                         const systems::SystemSpec& sys, const Configuration& target,
                         double hit_threshold);

struct FesCurve {
  std::vector<double> centers;
  std::vector<double> free_energy;  // min-shifted; +inf on empty bins
  std::vector<std::int64_t> counts;
  double bin_width = 0.0;
  double effective_samples = 0.0;  // (sum w)^2 / sum w^2
};

using CoordinateFn = std::function<double(const Configuration&)>;

// Boltzmann inversion of the e^{beta V}-reweighted histogram of coordinate_fn
// over post-burn-in frames. Bias annotations are required; V == 0 reduces to
// the plain inverted histogram bit-for-bit.
FesCurve reweighted_fes(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn,
                        double beta, int n_bins, double burn_in_fraction);

// (1/beta) log of the basin Boltzmann-mass ratio, basin A = centers >= split.
double delta_f(const FesCurve& fes, double beta, double basin_split);
double delta_f(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn, double beta,
               int n_bins, double burn_in_fraction, double basin_split);

struct DeltaFSeries {
  std::vector<std::pair<std::int64_t, double>> checkpoints;  // (step, delta F)
  double final_value = 0.0;
  double reference = 0.0;
  bool converged = false;  // |final - reference| <= tolerance
};

// Delta F recomputed on growing post-burn-in prefixes every checkpoint_stride
// frames (bin range fixed from the full window so prefixes are comparable).
DeltaFSeries delta_f_series(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn,
                            double beta, double burn_in_fraction,
                            std::int64_t checkpoint_stride_frames, double basin_split,
                            int n_bins, double reference, double tolerance);

struct LandscapeRow {
  std::vector<double> coords;
  double cv = 0.0;
};

struct LandscapeGrid {
  int n_x = 64;
  int n_y = 1;  // > 1 only for 2D systems
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;

  static LandscapeGrid default_for(const systems::SystemSpec& sys, int n = 64);
};

// CV evaluated over the system's configuration-manifold grid: x for the
// double well, (x, y) for Muller-Brown, a torsion sweep at equilibrium
// bonds/angles for butane4.
std::vector<LandscapeRow> cv_landscape(const cvmodels::CvEncoder& enc,
                                       const systems::SystemSpec& sys,
                                       const LandscapeGrid& grid);

}  // namespace tlc::analysis
