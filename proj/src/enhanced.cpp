// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/enhanced.hpp"

#include <algorithm>
#include <cmath>

namespace tlc::enhanced {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double kernel(double s, double center, double sigma) {
  const double z = (s - center) / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

inline double kernel_ds(double s, double center, double sigma) {
  const double z = (s - center) / sigma;
  return kernel(s, center, sigma) * (-z / sigma);
}

void check_opes(const OpesConfig& cfg) {
  require(cfg.pace >= 1, "OpesConfig: pace must be >= 1");
  require(cfg.sigma > 0.0, "OpesConfig: sigma must be > 0");
  require(cfg.barrier > 0.0, "OpesConfig: barrier must be > 0");
  require(cfg.beta > 0.0, "OpesConfig: beta must be > 0");
  require(cfg.resolved_gamma() > 1.0, "OpesConfig: gamma must be > 1");
}

// Grid cache of (V, dV/ds); numerators are incremental per deposit, node
// values recomputed from them after every deposit.
struct BiasGrid {
  double lo, hi, dx;
  int n;
  std::vector<double> numer, dnumer;  // sum_k w_k G and G' at nodes
  std::vector<double> v, dv;

  BiasGrid(const OpesConfig& cfg)
      : lo(cfg.grid_lo), hi(cfg.grid_hi), n(cfg.grid_bins) {
    require(n >= 2 && hi > lo, "OpesConfig: bad bias grid");
    dx = (hi - lo) / (n - 1);
    numer.assign(static_cast<std::size_t>(n), 0.0);
    dnumer.assign(static_cast<std::size_t>(n), 0.0);
    v.assign(static_cast<std::size_t>(n), 0.0);
    dv.assign(static_cast<std::size_t>(n), 0.0);
  }

  void add_kernel(double center, double weight, double sigma) {
    for (int i = 0; i < n; ++i) {
      const double s = lo + i * dx;
      numer[static_cast<std::size_t>(i)] += weight * kernel(s, center, sigma);
      dnumer[static_cast<std::size_t>(i)] += weight * kernel_ds(s, center, sigma);
    }
  }

  void refresh(const OpesState& state, const OpesConfig& cfg) {
    const double g = cfg.resolved_gamma();
    const double eps = cfg.resolved_epsilon();
    const double kappa = (1.0 - 1.0 / g) / cfg.beta;
    for (int i = 0; i < n; ++i) {
      const double p = numer[static_cast<std::size_t>(i)] / state.sum_weights;
      const double dp = dnumer[static_cast<std::size_t>(i)] / state.sum_weights;
      const double arg = p / state.z + eps;
      v[static_cast<std::size_t>(i)] = kappa * std::log(arg);
      dv[static_cast<std::size_t>(i)] = kappa * (dp / state.z) / arg;
    }
  }

  bool covers(double s) const { return s >= lo && s <= hi; }

  BiasValue eval(double s) const {
    const double f = (s - lo) / dx;
    const int i = std::min(static_cast<int>(f), n - 2);
    const double w = f - i;
    BiasValue b;
    b.v = (1.0 - w) * v[static_cast<std::size_t>(i)] + w * v[static_cast<std::size_t>(i) + 1];
    b.dvds =
        (1.0 - w) * dv[static_cast<std::size_t>(i)] + w * dv[static_cast<std::size_t>(i) + 1];
    return b;
  }
};

}  // namespace

double smd_target(std::int64_t t, const SmdConfig& cfg) {
  require(cfg.horizon_steps >= 1, "SmdConfig: horizon_steps must be >= 1");
  require(t >= 0 && t <= cfg.horizon_steps, "smd_target: t out of [0, T]");
  const double tt = static_cast<double>(t);
  const double T = static_cast<double>(cfg.horizon_steps);
  return (tt * cfg.s_target + (T - tt) * cfg.s_initial) / T;
}

Configuration smd_bias_force(const cvmodels::CvFunction& cv, const Configuration& x,
                             std::int64_t t, const SmdConfig& cfg) {
  require(cfg.k > 0.0, "SmdConfig: k must be > 0");
  const double dev = smd_target(t, cfg) - cv.value(x);
  Configuration g = cv.gradient(x);
  for (double& v : g) v *= cfg.k * dev;
  return g;
}

Configuration smd_bias_force(const cvmodels::CvEncoder& encoder, const Configuration& x,
                             std::int64_t t, const SmdConfig& cfg) {
  return smd_bias_force(cvmodels::cv_function(encoder), x, t, cfg);
}

std::uint64_t replica_seed(std::uint64_t base, int replica) {
  std::uint64_t z = base ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(replica) + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SmdRunResult run_smd(const systems::SystemSpec& sys, const cvmodels::CvFunction& cv,
                     const dynamics::LangevinParams& langevin, const SmdConfig& cfg,
                     const std::vector<Configuration>& initial_pool) {
  require(!initial_pool.empty(), "run_smd: empty initial pool");
  require(cfg.n_replicas >= 1, "run_smd: n_replicas must be >= 1");
  require(cfg.k >= 0.0, "run_smd: k must be >= 0");

  SmdRunResult out;
  out.replicas.reserve(static_cast<std::size_t>(cfg.n_replicas));
  out.diverged.assign(static_cast<std::size_t>(cfg.n_replicas), false);

  for (int rep = 0; rep < cfg.n_replicas; ++rep) {
    dynamics::LangevinParams params = langevin;
    params.seed = replica_seed(cfg.seed, rep);
    const Configuration& init = initial_pool[static_cast<std::size_t>(rep) % initial_pool.size()];

    dynamics::BiasForceFn bias = [&](const Configuration& x, std::int64_t step,
                                     Configuration& f) {
      if (cfg.k == 0.0) return;
      const double t = static_cast<double>(std::min(step, cfg.horizon_steps));
      const double T = static_cast<double>(cfg.horizon_steps);
      const double target = (t * cfg.s_target + (T - t) * cfg.s_initial) / T;
      const double dev = target - cv.value(x);
      const Configuration g = cv.gradient(x);
      for (std::size_t j = 0; j < f.size(); ++j) f[j] += cfg.k * dev * g[j];
    };

    dynamics::RunOptions opts;
    opts.record_energy = true;
    opts.bias = &bias;
    try {
      dynamics::Trajectory traj =
          dynamics::run(sys, params, init, cfg.horizon_steps, cfg.record_stride, opts);
      traj.cv.reserve(traj.frames.size());
      for (const auto& fr : traj.frames) traj.cv.push_back(cv.value(fr));
      out.replicas.push_back(std::move(traj));
    } catch (const NumericsError&) {
      out.diverged[static_cast<std::size_t>(rep)] = true;
      out.replicas.push_back(dynamics::Trajectory{});
    }
  }
  return out;
}

double OpesConfig::resolved_gamma() const { return gamma > 0.0 ? gamma : beta * barrier; }

double OpesConfig::resolved_epsilon() const {
  if (epsilon > 0.0) return epsilon;
  const double g = resolved_gamma();
  return std::exp(-beta * barrier / (1.0 - 1.0 / g));
}

BiasValue opes_bias(const OpesState& state, double s, const OpesConfig& cfg) {
  check_opes(cfg);
  const double g = cfg.resolved_gamma();
  const double eps = cfg.resolved_epsilon();
  const double kappa = (1.0 - 1.0 / g) / cfg.beta;
  BiasValue out;
  if (state.kernels.empty()) {
    out.v = kappa * std::log(eps);
    out.dvds = 0.0;
    return out;
  }
  double num = 0.0, dnum = 0.0;
  for (const auto& k : state.kernels) {
    num += k.weight * kernel(s, k.center, cfg.sigma);
    dnum += k.weight * kernel_ds(s, k.center, cfg.sigma);
  }
  const double p = num / state.sum_weights;
  const double dp = dnum / state.sum_weights;
  const double arg = p / state.z + eps;
  out.v = kappa * std::log(arg);
  out.dvds = kappa * (dp / state.z) / arg;
  return out;
}

void opes_deposit(OpesState& state, double s_new, const OpesConfig& cfg) {
  check_opes(cfg);
  const double v_before = opes_bias(state, s_new, cfg).v;
  const double w = std::exp(cfg.beta * v_before);

  // numerators at existing centers gain the new kernel
  for (std::size_t j = 0; j < state.kernels.size(); ++j)
    state.center_numer[j] += w * kernel(state.kernels[j].center, s_new, cfg.sigma);
  // fresh numerator at the new center over all kernels including itself
  double numer_new = w * kernel(s_new, s_new, cfg.sigma);
  for (const auto& k : state.kernels) numer_new += k.weight * kernel(s_new, k.center, cfg.sigma);

  state.kernels.push_back({s_new, w});
  state.center_numer.push_back(numer_new);
  state.sum_weights += w;

  double acc = 0.0;
  for (double nj : state.center_numer) acc += nj / state.sum_weights;
  state.z = acc / static_cast<double>(state.kernels.size());
}

OpesRunResult run_opes(const systems::SystemSpec& sys, const cvmodels::CvFunction& cv,
                       const dynamics::LangevinParams& langevin, const OpesConfig& cfg,
                       const Configuration& init) {
  check_opes(cfg);
  require(cfg.total_steps >= 1, "run_opes: total_steps must be >= 1");
  require(cfg.record_stride >= 1, "run_opes: record_stride must be >= 1");

  dynamics::LangevinParams params = langevin;
  params.seed = cfg.seed;

  OpesRunResult out;
  BiasGrid grid(cfg);

  Rng rng(params.seed);
  dynamics::MdState md;
  md.x = init;
  md.v = dynamics::thermal_velocities(params, sys.spatial_dim, rng);

  dynamics::Trajectory& traj = out.traj;
  traj.record_stride = cfg.record_stride;
  traj.params = params;
  traj.n_particles = sys.particle_count;
  traj.spatial_dim = sys.spatial_dim;

  dynamics::ForceFn force_fn = [&sys](const Configuration& x, Configuration& f) {
    systems::force_into(sys, x, f);
  };
  dynamics::BiasForceFn bias_fn = [&](const Configuration& x, std::int64_t, Configuration& f) {
    if (out.state.kernels.empty()) return;  // constant floor, zero force
    const double s = cv.value(x);
    const BiasValue b =
        grid.covers(s) ? grid.eval(s) : opes_bias(out.state, s, cfg);
    if (b.dvds == 0.0) return;
    const Configuration g = cv.gradient(x);
    for (std::size_t j = 0; j < f.size(); ++j) f[j] -= b.dvds * g[j];
  };

  auto record = [&](std::int64_t step_idx) {
    const double s = cv.value(md.x);
    const double v_exact = opes_bias(out.state, s, cfg).v;
    traj.frames.push_back(md.x);
    traj.energy.push_back(systems::potential_energy(sys, md.x));
    traj.bias.push_back(v_exact);
    traj.cv.push_back(s);
    out.log.push_back({step_idx, s, v_exact, out.state.kernels.size()});
  };
  record(0);

  for (std::int64_t step_idx = 0; step_idx < cfg.total_steps; ++step_idx) {
    try {
      dynamics::step(md, params, force_fn, &bias_fn, rng);
    } catch (const NumericsError& e) {
      const double s_last = cv.value(traj.frames.back());
      throw NumericsError(std::string(e.what()) + " (OPES bias at last recorded CV " +
                          std::to_string(s_last) + ": " +
                          std::to_string(opes_bias(out.state, s_last, cfg).v) + ")");
    }
    if ((step_idx + 1) % cfg.pace == 0) {
      opes_deposit(out.state, cv.value(md.x), cfg);
      const auto& added = out.state.kernels.back();
      grid.add_kernel(added.center, added.weight, cfg.sigma);
      grid.refresh(out.state, cfg);
    }
    if ((step_idx + 1) % cfg.record_stride == 0) record(step_idx + 1);
  }
  return out;
}

}  // namespace tlc::enhanced
