// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlc/geometry.hpp"

namespace tlc::analysis {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Weighted {
  std::vector<double> coord;
  std::vector<double> weight;
  double sum_w = 0.0, sum_w2 = 0.0;
};

Weighted reweight(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn,
                  double beta, std::size_t begin, std::size_t end) {
  require(traj.bias.size() == traj.frames.size(),
          "reweighted_fes: per-frame bias values required");
  require(begin < end && end <= traj.frames.size(), "reweighted_fes: empty frame window");
  Weighted w;
  w.coord.reserve(end - begin);
  w.weight.reserve(end - begin);
  // weights are shifted by vmax for overflow safety; with V == 0 throughout
  // this keeps unit weights exactly
  double vmax = -kInf;
  for (std::size_t i = begin; i < end; ++i) vmax = std::max(vmax, traj.bias[i]);
  for (std::size_t i = begin; i < end; ++i) {
    w.coord.push_back(coordinate_fn(traj.frames[i]));
    const double wi = std::exp(beta * (traj.bias[i] - vmax));
    w.weight.push_back(wi);
    w.sum_w += wi;
    w.sum_w2 += wi * wi;
  }
  return w;
}

FesCurve bin_fes(const Weighted& w, double beta, int n_bins, double lo, double hi) {
  require(n_bins >= 1, "reweighted_fes: n_bins must be >= 1");
  if (!(hi > lo)) throw DegenerateError("reweighted_fes: empty bin range");
  FesCurve fes;
  fes.bin_width = (hi - lo) / n_bins;
  fes.centers.resize(static_cast<std::size_t>(n_bins));
  for (int b = 0; b < n_bins; ++b)
    fes.centers[static_cast<std::size_t>(b)] = lo + (b + 0.5) * fes.bin_width;
  fes.counts.assign(static_cast<std::size_t>(n_bins), 0);
  std::vector<double> mass(static_cast<std::size_t>(n_bins), 0.0);
  for (std::size_t i = 0; i < w.coord.size(); ++i) {
    const double c = w.coord[i];
    if (c < lo || c > hi) continue;
    const int b = std::min(static_cast<int>((c - lo) / fes.bin_width), n_bins - 1);
    mass[static_cast<std::size_t>(b)] += w.weight[i];
    fes.counts[static_cast<std::size_t>(b)] += 1;
  }
  fes.free_energy.assign(static_cast<std::size_t>(n_bins), kInf);
  double fmin = kInf;
  for (int b = 0; b < n_bins; ++b) {
    if (fes.counts[static_cast<std::size_t>(b)] == 0) continue;
    const double density = mass[static_cast<std::size_t>(b)] / (w.sum_w * fes.bin_width);
    fes.free_energy[static_cast<std::size_t>(b)] = -std::log(density) / beta;
    fmin = std::min(fmin, fes.free_energy[static_cast<std::size_t>(b)]);
  }
  if (fmin == kInf) throw DegenerateError("reweighted_fes: all bins empty");
  for (double& f : fes.free_energy)
    if (f != kInf) f -= fmin;
  fes.effective_samples = w.sum_w * w.sum_w / w.sum_w2;
  return fes;
}

std::size_t burn_in_start(std::size_t n_frames, double burn_in_fraction) {
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0,
          "burn_in_fraction must lie in [0, 1)");
  return static_cast<std::size_t>(burn_in_fraction * static_cast<double>(n_frames));
}

}  // namespace

PathMetrics path_metrics(const std::vector<dynamics::Trajectory>& trajs,
                         const systems::SystemSpec& sys, const Configuration& target,
                         double hit_threshold) {
  require(!trajs.empty(), "path_metrics: no trajectories");
  require(hit_threshold > 0.0, "path_metrics: hit_threshold must be > 0");
  const double target_coord = systems::basin_coordinate(sys, target);

  PathMetrics out;
  double rmsd_sum = 0.0;
  int live = 0;
  std::vector<double> ets_hits;
  for (std::size_t rep = 0; rep < trajs.size(); ++rep) {
    const auto& tr = trajs[rep];
    ReplicaMetrics m;
    m.replica = static_cast<int>(rep);
    if (tr.frames.empty()) {
      m.diverged = true;
      out.replicas.push_back(m);
      continue;
    }
    require(tr.energy.size() == tr.frames.size(),
            "path_metrics: potential-energy annotations required");
    m.rmsd_min = kInf;
    m.e_max = -kInf;
    for (std::size_t i = 0; i < tr.frames.size(); ++i) {
      m.rmsd_min =
          std::min(m.rmsd_min, geometry::rmsd(tr.frames[i], target, sys.spatial_dim));
      m.e_max = std::max(m.e_max, tr.energy[i]);
      if (std::abs(systems::basin_coordinate(sys, tr.frames[i]) - target_coord) < hit_threshold)
        m.hit = true;
    }
    rmsd_sum += m.rmsd_min;
    live += 1;
    if (m.hit) ets_hits.push_back(m.e_max);
    out.replicas.push_back(m);
  }
  require(live > 0, "path_metrics: all replicas diverged");
  out.rmsd_mean = rmsd_sum / live;
  out.thp_percent = 100.0 * static_cast<double>(ets_hits.size()) / static_cast<double>(live);
  if (!ets_hits.empty()) {
    double m = 0.0;
    for (double e : ets_hits) m += e;
    m /= static_cast<double>(ets_hits.size());
    out.ets_mean = m;
    double var = 0.0;
    for (double e : ets_hits) var += (e - m) * (e - m);
    out.ets_std = ets_hits.size() > 1
                      ? std::sqrt(var / static_cast<double>(ets_hits.size() - 1))
                      : 0.0;
  }
  return out;
}

FesCurve reweighted_fes(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn,
                        double beta, int n_bins, double burn_in_fraction) {
  require(beta > 0.0, "reweighted_fes: beta must be > 0");
  const std::size_t start = burn_in_start(traj.frames.size(), burn_in_fraction);
  const Weighted w = reweight(traj, coordinate_fn, beta, start, traj.frames.size());
  const auto [lo_it, hi_it] = std::minmax_element(w.coord.begin(), w.coord.end());
  return bin_fes(w, beta, n_bins, *lo_it, *hi_it);
}

double delta_f(const FesCurve& fes, double beta, double basin_split) {
  require(beta > 0.0, "delta_f: beta must be > 0");
  double mass_a = 0.0, mass_b = 0.0;
  for (std::size_t b = 0; b < fes.centers.size(); ++b) {
    if (fes.free_energy[b] == kInf) continue;
    const double m = std::exp(-beta * fes.free_energy[b]) * fes.bin_width;
    (fes.centers[b] >= basin_split ? mass_a : mass_b) += m;
  }
  if (!(mass_a > 0.0) || !(mass_b > 0.0))
    throw DegenerateError("delta_f: a basin has no sampled bins");
  return std::log(mass_a / mass_b) / beta;
}

double delta_f(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn, double beta,
               int n_bins, double burn_in_fraction, double basin_split) {
  return delta_f(reweighted_fes(traj, coordinate_fn, beta, n_bins, burn_in_fraction), beta,
                 basin_split);
}

DeltaFSeries delta_f_series(const dynamics::Trajectory& traj, const CoordinateFn& coordinate_fn,
                            double beta, double burn_in_fraction,
                            std::int64_t checkpoint_stride_frames, double basin_split,
                            int n_bins, double reference, double tolerance) {
  require(checkpoint_stride_frames >= 1, "delta_f_series: checkpoint stride must be >= 1");
  const std::size_t n = traj.frames.size();
  const std::size_t start = burn_in_start(n, burn_in_fraction);
  require(start + 1 < n, "delta_f_series: nothing left after burn-in");

  // fixed bin range from the full post-burn-in window
  const Weighted full = reweight(traj, coordinate_fn, beta, start, n);
  const auto [lo_it, hi_it] = std::minmax_element(full.coord.begin(), full.coord.end());
  const double lo = *lo_it, hi = *hi_it;

  DeltaFSeries series;
  series.reference = reference;
  const std::size_t stride = static_cast<std::size_t>(checkpoint_stride_frames);
  for (std::size_t end = start + stride;; end += stride) {
    const bool last = end >= n;
    const std::size_t e = last ? n : end;
    Weighted w;
    w.coord.assign(full.coord.begin(), full.coord.begin() + static_cast<std::ptrdiff_t>(e - start));
    w.weight.assign(full.weight.begin(),
                    full.weight.begin() + static_cast<std::ptrdiff_t>(e - start));
    for (double wi : w.weight) {
      w.sum_w += wi;
      w.sum_w2 += wi * wi;
    }
    try {
      const FesCurve fes = bin_fes(w, beta, n_bins, lo, hi);
      series.checkpoints.emplace_back(static_cast<std::int64_t>(e - 1) * traj.record_stride,
                                      delta_f(fes, beta, basin_split));
    } catch (const DegenerateError&) {
      // prefix covers a single basin; skip this checkpoint
    }
    if (last) break;
  }
  require(!series.checkpoints.empty(), "delta_f_series: no checkpoint covered both basins");
  series.final_value = series.checkpoints.back().second;
  series.converged = std::abs(series.final_value - reference) <= tolerance;
  return series;
}

LandscapeGrid LandscapeGrid::default_for(const systems::SystemSpec& sys, int n) {
  LandscapeGrid g;
  g.n_x = n;
  switch (sys.kind) {
    case systems::SystemKind::DoubleWell1d:
      g.x_lo = -1.6;
      g.x_hi = 1.6;
      break;
    case systems::SystemKind::MullerBrown2d:
      g.n_y = n;
      g.x_lo = -1.7;
      g.x_hi = 1.2;
      g.y_lo = -0.4;
      g.y_hi = 2.1;
      break;
    case systems::SystemKind::Butane4:
      g.x_lo = -kPi + 2.0 * kPi / n;  // torsion sweep over (-pi, pi]
      g.x_hi = kPi;
      break;
  }
  return g;
}

std::vector<LandscapeRow> cv_landscape(const cvmodels::CvEncoder& enc,
                                       const systems::SystemSpec& sys,
                                       const LandscapeGrid& grid) {
  require(grid.n_x >= 1, "cv_landscape: n_x must be >= 1");
  std::vector<LandscapeRow> rows;
  auto xs = [&](int i) {
    return grid.n_x == 1 ? grid.x_lo
                         : grid.x_lo + (grid.x_hi - grid.x_lo) * i / (grid.n_x - 1);
  };
  switch (sys.kind) {
    case systems::SystemKind::DoubleWell1d: {
      for (int i = 0; i < grid.n_x; ++i) {
        const double x = xs(i);
        rows.push_back({{x}, cvmodels::encode(enc, {x})});
      }
      break;
    }
    case systems::SystemKind::MullerBrown2d: {
      require(grid.n_y >= 1, "cv_landscape: n_y must be >= 1");
      for (int j = 0; j < grid.n_y; ++j) {
        const double y = grid.n_y == 1
                             ? grid.y_lo
                             : grid.y_lo + (grid.y_hi - grid.y_lo) * j / (grid.n_y - 1);
        for (int i = 0; i < grid.n_x; ++i) {
          const double x = xs(i);
          rows.push_back({{x, y}, cvmodels::encode(enc, {x, y})});
        }
      }
      break;
    }
    case systems::SystemKind::Butane4: {
      const auto& p = std::get<systems::Butane4Params>(sys.params);
      for (int i = 0; i < grid.n_x; ++i) {
        const double phi = xs(i);
        const Configuration c = systems::butane4_chain(p, phi);
        rows.push_back({{phi}, cvmodels::encode(enc, c)});
      }
      break;
    }
  }
  return rows;
}

}  // namespace tlc::analysis
