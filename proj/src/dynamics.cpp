// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "tlc/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "trajectory format is little-endian; big-endian hosts unsupported");

namespace tlc::dynamics {

namespace {

void check_params(const LangevinParams& p) {
  require(p.dt > 0.0, "LangevinParams: dt must be > 0");
  require(p.gamma >= 0.0, "LangevinParams: gamma must be >= 0");
  require(p.temperature >= 0.0, "LangevinParams: temperature must be >= 0");
  for (double m : p.masses) require(m > 0.0, "LangevinParams: masses must be > 0");
}

struct StepWork {
  Configuration f;
};

void eval_force(const Configuration& x, std::int64_t t, const ForceFn& force_fn,
                const BiasForceFn* bias_fn, Configuration& f) {
  force_fn(x, f);
  if (bias_fn != nullptr) (*bias_fn)(x, t, f);
  if (!all_finite(f))
    throw NumericsError("simulation diverged: non-finite force at step " + std::to_string(t));
}

void step_impl(MdState& s, const LangevinParams& p, const ForceFn& force_fn,
               const BiasForceFn* bias_fn, Rng& rng, StepWork& w) {
  const std::size_t n = s.x.size();
  const std::size_t sd = n / p.masses.size();
  const double dt = p.dt;
  const double c1 = std::exp(-p.gamma * dt);
  const double c2 = std::sqrt(std::max(0.0, 1.0 - c1 * c1));

  eval_force(s.x, s.t, force_fn, bias_fn, w.f);
  for (std::size_t i = 0; i < n; ++i) s.v[i] += 0.5 * dt * w.f[i] / p.masses[i / sd];
  for (std::size_t i = 0; i < n; ++i) s.x[i] += 0.5 * dt * s.v[i];
  for (std::size_t i = 0; i < n; ++i) {
    const double sigma = std::sqrt(p.temperature / p.masses[i / sd]);
    s.v[i] = c1 * s.v[i] + c2 * sigma * rng.gaussian();
  }
  for (std::size_t i = 0; i < n; ++i) s.x[i] += 0.5 * dt * s.v[i];
  eval_force(s.x, s.t, force_fn, bias_fn, w.f);
  for (std::size_t i = 0; i < n; ++i) s.v[i] += 0.5 * dt * w.f[i] / p.masses[i / sd];
  s.t += 1;

  if (!all_finite(s.x) || !all_finite(s.v))
    throw NumericsError("simulation diverged: non-finite state at step " + std::to_string(s.t));
}

Trajectory run_loop(const ForceFn& force_fn, int n_particles, int spatial_dim,
                    const LangevinParams& params, const Configuration& init,
                    std::int64_t n_steps, std::int64_t record_stride, const RunOptions& opts,
                    const std::function<double(const Configuration&)>* energy_fn) {
  check_params(params);
  require(record_stride >= 1, "run: record_stride must be >= 1");
  require(n_steps >= record_stride, "run: n_steps must be >= record_stride");
  require(static_cast<int>(init.size()) == n_particles * spatial_dim,
          "run: init dimension mismatch");
  require(params.masses.size() == static_cast<std::size_t>(n_particles),
          "run: one mass per particle required");
  require(all_finite(init), "run: non-finite initial configuration");

  Rng rng(params.seed);
  MdState s;
  s.x = init;
  s.v = thermal_velocities(params, spatial_dim, rng);
  s.t = 0;

  Trajectory traj;
  traj.record_stride = record_stride;
  traj.params = params;
  traj.n_particles = n_particles;
  traj.spatial_dim = spatial_dim;
  traj.frames.reserve(static_cast<std::size_t>(n_steps / record_stride) + 1);

  auto record = [&]() {
    traj.frames.push_back(s.x);
    if (opts.record_energy && energy_fn != nullptr) traj.energy.push_back((*energy_fn)(s.x));
  };
  record();

  StepWork w;
  for (std::int64_t i = 0; i < n_steps; ++i) {
    step_impl(s, params, force_fn, opts.bias, rng, w);
    if ((i + 1) % record_stride == 0) record();
  }
  return traj;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw NumericsError("trajectory file truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void step(MdState& state, const LangevinParams& params, const ForceFn& force_fn,
          const BiasForceFn* bias_fn, Rng& rng) {
  check_params(params);
  require(state.x.size() == state.v.size(), "step: x/v size mismatch");
  require(state.x.size() % params.masses.size() == 0, "step: masses do not divide dimension");
  require(all_finite(state.x) && all_finite(state.v), "step: non-finite state");
  StepWork w;
  step_impl(state, params, force_fn, bias_fn, rng, w);
}

std::vector<double> thermal_velocities(const LangevinParams& params, int spatial_dim, Rng& rng) {
  std::vector<double> v(params.masses.size() * static_cast<std::size_t>(spatial_dim));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = params.masses[i / static_cast<std::size_t>(spatial_dim)];
    v[i] = std::sqrt(params.temperature / m) * rng.gaussian();
  }
  return v;
}

Trajectory run(const systems::SystemSpec& sys, const LangevinParams& params,
               const Configuration& init, std::int64_t n_steps, std::int64_t record_stride,
               const RunOptions& opts) {
  ForceFn ff = [&sys](const Configuration& x, Configuration& f) {
    systems::force_into(sys, x, f);
  };
  std::function<double(const Configuration&)> ef = [&sys](const Configuration& x) {
    return systems::potential_energy(sys, x);
  };
  return run_loop(ff, sys.particle_count, sys.spatial_dim, params, init, n_steps, record_stride,
                  opts, &ef);
}

Trajectory run_custom(const ForceFn& force_fn, int n_particles, int spatial_dim,
                      const LangevinParams& params, const Configuration& init,
                      std::int64_t n_steps, std::int64_t record_stride, const RunOptions& opts) {
  return run_loop(force_fn, n_particles, spatial_dim, params, init, n_steps, record_stride, opts,
                  nullptr);
}

PairDataset extract_pairs(const std::vector<Trajectory>& trajs, const systems::SystemSpec& sys,
                          std::int64_t tau_steps, bool exclude_transitions, std::size_t max_pairs,
                          Rng& rng) {
  require(tau_steps > 0, "extract_pairs: tau_steps must be > 0");
  require(!trajs.empty(), "extract_pairs: no trajectories");

  struct Ref {
    std::size_t traj, frame;
  };
  std::vector<Ref> eligible;
  for (std::size_t ti = 0; ti < trajs.size(); ++ti) {
    const Trajectory& tr = trajs[ti];
    require(tr.record_stride >= 1 && tau_steps % tr.record_stride == 0,
            "extract_pairs: tau_steps must be a multiple of record_stride");
    const std::size_t lag = static_cast<std::size_t>(tau_steps / tr.record_stride);
    if (tr.frames.size() <= lag) continue;
    std::vector<systems::BasinLabel> labels;
    if (exclude_transitions) {
      labels.reserve(tr.frames.size());
      for (const auto& f : tr.frames) labels.push_back(systems::basin_of(sys, f));
    }
    for (std::size_t i = 0; i + lag < tr.frames.size(); ++i) {
      if (exclude_transitions && labels[i] != labels[i + lag]) continue;
      eligible.push_back({ti, i});
    }
  }
  if (eligible.empty()) throw DegenerateError("extract_pairs: no eligible pairs");

  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (max_pairs > 0 && eligible.size() > max_pairs) {
    // partial Fisher-Yates, then restore time order
    for (std::size_t i = 0; i < max_pairs; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform() * (order.size() - i));
      std::swap(order[i], order[std::min(j, order.size() - 1)]);
    }
    order.resize(max_pairs);
    std::sort(order.begin(), order.end());
  }

  PairDataset ds;
  ds.tau_steps = tau_steps;
  ds.x_t.reserve(order.size());
  ds.x_tau.reserve(order.size());
  for (std::size_t idx : order) {
    const Ref& r = eligible[idx];
    const Trajectory& tr = trajs[r.traj];
    const std::size_t lag = static_cast<std::size_t>(tau_steps / tr.record_stride);
    ds.x_t.push_back(tr.frames[r.frame]);
    ds.x_tau.push_back(tr.frames[r.frame + lag]);
  }
  return ds;
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::string out;
  out.reserve(64 + traj.frames.size() * traj.frames.front().size() * sizeof(double));
  out.append("TLCTRJ1", 7);
  put<std::uint32_t>(out, 1u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.n_particles));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.spatial_dim));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(traj.frames.size()));
  put<double>(out, traj.params.dt);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(traj.record_stride));
  put<std::uint64_t>(out, traj.params.seed);
  for (const auto& fr : traj.frames)
    out.append(reinterpret_cast<const char*>(fr.data()), fr.size() * sizeof(double));
  io::atomic_write(path, out);
}

Trajectory read_trajectory(const std::string& path) {
  const std::string in = io::read_bytes(path);
  if (in.size() < 7 || in.compare(0, 7, "TLCTRJ1") != 0)
    throw NumericsError("not a trajectory file: " + path);
  std::size_t off = 7;
  const auto version = take<std::uint32_t>(in, off);
  if (version != 1) throw NumericsError("unsupported trajectory version");
  Trajectory traj;
  traj.n_particles = static_cast<int>(take<std::uint32_t>(in, off));
  traj.spatial_dim = static_cast<int>(take<std::uint32_t>(in, off));
  const auto n_frames = take<std::uint64_t>(in, off);
  traj.params.dt = take<double>(in, off);
  traj.record_stride = static_cast<std::int64_t>(take<std::uint64_t>(in, off));
  traj.params.seed = take<std::uint64_t>(in, off);
  const std::size_t dim = static_cast<std::size_t>(traj.n_particles) *
                          static_cast<std::size_t>(traj.spatial_dim);
  traj.frames.resize(n_frames);
  for (auto& fr : traj.frames) {
    fr.resize(dim);
    for (auto& v : fr) v = take<double>(in, off);
  }
  return traj;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  io::Csv csv;
  std::vector<std::string> cols{"frame", "step"};
  const std::size_t dim = traj.frames.empty() ? 0 : traj.frames.front().size();
  for (std::size_t i = 0; i < dim; ++i) cols.push_back("x" + std::to_string(i));
  const bool has_e = traj.energy.size() == traj.frames.size();
  const bool has_b = traj.bias.size() == traj.frames.size();
  const bool has_cv = traj.cv.size() == traj.frames.size();
  if (has_e) cols.push_back("energy");
  if (has_b) cols.push_back("bias");
  if (has_cv) cols.push_back("cv");
  csv.header(cols);
  for (std::size_t i = 0; i < traj.frames.size(); ++i) {
    std::vector<std::string> cells{std::to_string(i),
                                   std::to_string(static_cast<std::int64_t>(i) *
                                                  traj.record_stride)};
    for (double v : traj.frames[i]) cells.push_back(io::fmt_double(v));
    if (has_e) cells.push_back(io::fmt_double(traj.energy[i]));
    if (has_b) cells.push_back(io::fmt_double(traj.bias[i]));
    if (has_cv) cells.push_back(io::fmt_double(traj.cv[i]));
    csv.row(cells);
  }
  io::atomic_write(path, csv.body);
}

}  // namespace tlc::dynamics
