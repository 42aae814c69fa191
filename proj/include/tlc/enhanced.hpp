// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "tlc/common.hpp"
#include "tlc/cvmodels.hpp"
#include "tlc/dynamics.hpp"
#include "tlc/systems.hpp"

namespace tlc::enhanced {

// ---------------------------------------------------------------------------
// Steered MD: harmonic restraint on the CV whose center moves linearly from
// s_initial to s_target over horizon_steps.
// ---------------------------------------------------------------------------
struct SmdConfig {
  double k = 10.0;  // force constant, energy / CV^2
  std::int64_t horizon_steps = 1000;
  double s_initial = 0.0;
  double s_target = 0.0;
  int n_replicas = 64;
  std::uint64_t seed = 0;
  std::int64_t record_stride = 10;
};

// (t * s_target + (T - t) * s_initial) / T.
double smd_target(std::int64_t t, const SmdConfig& cfg);

// Exact negative gradient of U(x,t) = (k/2)(target(t) - cv(x))^2 under the
// frozen-alignment convention: k (target - cv) * dcv/dx.
Configuration smd_bias_force(const cvmodels::CvFunction& cv, const Configuration& x,
                             std::int64_t t, const SmdConfig& cfg);
Configuration smd_bias_force(const cvmodels::CvEncoder& encoder, const Configuration& x,
                             std::int64_t t, const SmdConfig& cfg);

struct SmdRunResult {
  std::vector<dynamics::Trajectory> replicas;
  std::vector<bool> diverged;  // divergence is per replica, the batch continues
};

// Per-replica seed stream, shared with unbiased runs so k = 0 is bit-identical.
std::uint64_t replica_seed(std::uint64_t base, int replica);

// n_replicas biased trajectories started from the pool (round-robin), with
// energy and CV annotations per frame.
SmdRunResult run_smd(const systems::SystemSpec& sys, const cvmodels::CvFunction& cv,
                     const dynamics::LangevinParams& langevin, const SmdConfig& cfg,
                     const std::vector<Configuration>& initial_pool);

// ---------------------------------------------------------------------------
// OPES: adaptive bias from a weighted kernel estimate of the CV marginal.
// ---------------------------------------------------------------------------
struct OpesConfig {
  std::int64_t pace = 500;
  double sigma = 0.1;       // kernel bandwidth in CV units
  double barrier = 10.0;    // Delta E, energy units
  double gamma = 0.0;       // bias factor; 0 derives beta * barrier
  double epsilon = 0.0;     // 0 derives exp(-beta*barrier / (1 - 1/gamma))
  double beta = 1.0;        // inverse temperature
  std::int64_t record_stride = 500;
  std::int64_t total_steps = 0;
  std::uint64_t seed = 0;
  // bias cache for propagation; evaluations outside fall back to exact sums
  double grid_lo = -3.0;
  double grid_hi = 3.0;
  int grid_bins = 2048;

  double resolved_gamma() const;
  double resolved_epsilon() const;
};

struct OpesKernel {
  double center = 0.0;
  double weight = 0.0;
};

struct OpesState {
  std::vector<OpesKernel> kernels;
  double sum_weights = 0.0;
  double z = 1.0;  // mean of P_n over deposited kernel centers
  // running numerators sum_k w_k G(c_j, c_k) per center, kept so Z updates
  // stay O(n) per deposit
  std::vector<double> center_numer;

  std::size_t n_deposits() const { return kernels.size(); }
};

struct BiasValue {
  double v = 0.0;
  double dvds = 0.0;
};

// V_n(s) = (1 - 1/gamma) (1/beta) log(P_n(s)/Z_n + epsilon) with its analytic
// s-derivative; the empty state gives the constant floor (1-1/gamma)(1/beta)
// log(epsilon) = -barrier.
BiasValue opes_bias(const OpesState& state, double s, const OpesConfig& cfg);

// Weight e^{beta V_{n-1}(s_new)} computed from the bias before insertion;
// Z becomes the mean of the updated P over all kernel centers.
void opes_deposit(OpesState& state, double s_new, const OpesConfig& cfg);

struct BiasLogRow {
  std::int64_t step = 0;
  double s = 0.0;
  double v = 0.0;
  std::size_t n_kernels = 0;
};

struct OpesRunResult {
  dynamics::Trajectory traj;  // energy, bias (exact V) and cv annotations
  OpesState state;
  std::vector<BiasLogRow> log;
};

// Biased run driven by -dV/ds * dcv/dx with a kernel deposited every pace
// steps; the bias is quasi-static between deposits (evaluated from a grid
// cache refreshed per deposit; recorded V values are exact).
OpesRunResult run_opes(const systems::SystemSpec& sys, const cvmodels::CvFunction& cv,
                       const dynamics::LangevinParams& langevin, const OpesConfig& cfg,
                       const Configuration& init);

}  // namespace tlc::enhanced
