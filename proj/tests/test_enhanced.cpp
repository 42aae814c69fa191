// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "tlc/enhanced.hpp"
#include "tlc/geometry.hpp"
#include "tlc/systems.hpp"

using namespace tlc;
using namespace tlc::enhanced;

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

cvmodels::CvEncoder linear_1d_cv(double w, double b) {
  cvmodels::CvEncoder enc;
  enc.featurizer.mode = cvmodels::InputMode::AlignedCoords;
  enc.featurizer.reference = {0.0};
  enc.featurizer.n_particles = 1;
  enc.featurizer.spatial_dim = 1;
  enc.net.layer_sizes = {1, 1};
  enc.net.activation = nn::Activation::Identity;
  enc.net.weights = {{w}};
  enc.net.biases = {{b}};
  return enc;
}

OpesConfig base_opes(double beta, double barrier, double sigma) {
  OpesConfig c;
  c.beta = beta;
  c.barrier = barrier;
  c.sigma = sigma;
  c.pace = 100;
  c.record_stride = 100;
  c.total_steps = 1000;
  return c;
}

OpesState fuzz_state(Rng& rng, int n, double sigma_hint) {
  (void)sigma_hint;
  OpesState st;
  for (int i = 0; i < n; ++i) {
    const double c = 4.0 * rng.uniform() - 2.0;
    const double w = std::exp(2.0 * rng.uniform() - 1.0);
    st.kernels.push_back({c, w});
    st.sum_weights += w;
  }
  st.z = 0.3 + rng.uniform();  // any positive normalization
  return st;
}

}  // namespace

TEST_CASE("smd target interpolates linearly") {
  SmdConfig cfg;
  cfg.horizon_steps = 1000;
  cfg.s_initial = -0.8;
  cfg.s_target = 0.9;
  CHECK(smd_target(0, cfg) == doctest::Approx(-0.8));
  CHECK(smd_target(1000, cfg) == doctest::Approx(0.9));
  CHECK(smd_target(500, cfg) == doctest::Approx(0.05));
  CHECK_THROWS_AS(smd_target(-1, cfg), ContractError);
  CHECK_THROWS_AS(smd_target(1001, cfg), ContractError);
}

TEST_CASE("smd bias force closed forms") {
  // restraint at rest: zero force
  auto enc = linear_1d_cv(1.0, 0.0);
  SmdConfig cfg;
  cfg.k = 2.0;
  cfg.horizon_steps = 100;
  cfg.s_initial = 0.3;
  cfg.s_target = 0.3;
  const auto f0 = smd_bias_force(enc, {0.3}, 50, cfg);
  CHECK(std::abs(f0[0]) < 1e-14);

  // linear cv s = w x: deviation d gives k d w exactly
  auto enc2 = linear_1d_cv(1.5, 0.0);
  cfg.s_initial = cfg.s_target = 2.0;  // target fixed at 2
  const double x = 0.4;
  const double dev = 2.0 - 1.5 * x;
  const auto f = smd_bias_force(enc2, {x}, 10, cfg);
  CHECK(f[0] == doctest::Approx(cfg.k * dev * 1.5).epsilon(1e-14));
}

TEST_CASE("smd bias force is the exact negative gradient of the restraint") {
  // butane encoder with frozen-alignment FD of U = k/2 (target - cv)^2
  Rng rng(100);
  const auto sys = systems::SystemSpec::butane4();
  cvmodels::CvEncoder enc;
  enc.featurizer = cvmodels::Featurizer::for_system(sys, cvmodels::InputMode::AlignedCoords);
  enc.net = nn::init({12, 8, 1}, nn::Activation::Tanh, 101);

  SmdConfig cfg;
  cfg.k = 3.0;
  cfg.horizon_steps = 100;
  cfg.s_initial = 0.1;
  cfg.s_target = 0.9;

  const auto& p = std::get<systems::Butane4Params>(sys.params);
  for (int rep = 0; rep < 25; ++rep) {
    auto x = systems::butane4_chain(p, -3.0 + 6.0 * rng.uniform());
    for (auto& v : x) v += 0.1 * rng.gaussian();
    const std::int64_t t = static_cast<std::int64_t>(rng.uniform() * 100);

    const auto force = smd_bias_force(enc, x, t, cfg);

    // frozen rotation at the base point
    const auto res = geometry::kabsch_align(x, enc.featurizer.reference, 3);
    const auto rot = res.transform.rotation;
    double cref[3] = {0, 0, 0};
    for (int q = 0; q < 4; ++q)
      for (int a = 0; a < 3; ++a) cref[a] += enc.featurizer.reference[static_cast<std::size_t>(q) * 3 + a] / 4.0;
    const auto frozen_u = [&](const std::vector<double>& y) {
      double cy[3] = {0, 0, 0};
      for (int q = 0; q < 4; ++q)
        for (int a = 0; a < 3; ++a) cy[a] += y[static_cast<std::size_t>(q) * 3 + a] / 4.0;
      std::vector<double> feats(12);
      for (int q = 0; q < 4; ++q)
        for (int a = 0; a < 3; ++a) {
          double acc = cref[a];
          for (int b = 0; b < 3; ++b)
            acc += rot[static_cast<std::size_t>(a) * 3 + b] *
                   (y[static_cast<std::size_t>(q) * 3 + b] - cy[b]);
          feats[static_cast<std::size_t>(q) * 3 + a] = acc;
        }
      const double s = enc.calibration.apply(nn::forward(enc.net, feats)[0]);
      const double dev = smd_target(t, cfg) - s;
      return 0.5 * cfg.k * dev * dev;
    };
    const auto fd = oracles::fd_gradient(frozen_u, x, 1e-6);
    std::vector<double> neg(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) neg[i] = -fd[i];
    CHECK(oracles::max_rel_err(force, neg, 1e-7) < 1e-5);
  }
}

TEST_CASE("k=0 replicas are bit-identical to unbiased runs") {
  const auto sys = systems::SystemSpec::double_well_1d();
  dynamics::LangevinParams lp;
  lp.dt = 1e-3;
  lp.gamma = 1.0;
  lp.temperature = 1.0;
  lp.masses = sys.masses;

  auto enc = linear_1d_cv(1.0, 0.0);
  SmdConfig cfg;
  cfg.k = 0.0;
  cfg.horizon_steps = 400;
  cfg.s_initial = 1.0;
  cfg.s_target = -1.0;
  cfg.n_replicas = 3;
  cfg.seed = 555;
  cfg.record_stride = 10;
  const std::vector<Configuration> pool{{1.0}, {0.9}, {1.1}};
  const auto run = run_smd(sys, cvmodels::cv_function(enc), lp, cfg, pool);

  for (int rep = 0; rep < 3; ++rep) {
    dynamics::LangevinParams lp2 = lp;
    lp2.seed = replica_seed(cfg.seed, rep);
    const auto ref = dynamics::run(sys, lp2, pool[static_cast<std::size_t>(rep)], 400, 10);
    REQUIRE(run.replicas[static_cast<std::size_t>(rep)].frames.size() == ref.frames.size());
    for (std::size_t i = 0; i < ref.frames.size(); ++i)
      CHECK(run.replicas[static_cast<std::size_t>(rep)].frames[i] == ref.frames[i]);
  }
}

TEST_CASE("smd frame counting and annotations") {
  const auto sys = systems::SystemSpec::double_well_1d();
  dynamics::LangevinParams lp;
  lp.dt = 1e-3;
  lp.masses = sys.masses;
  auto enc = linear_1d_cv(1.0, 0.0);
  SmdConfig cfg;
  cfg.k = 5.0;
  cfg.horizon_steps = 300;
  cfg.s_initial = 1.0;
  cfg.s_target = -1.0;
  cfg.n_replicas = 2;
  cfg.seed = 7;
  cfg.record_stride = 10;
  const auto run = run_smd(sys, cvmodels::cv_function(enc), lp, cfg, {{1.0}});
  for (const auto& tr : run.replicas) {
    CHECK(tr.frames.size() == 31);  // horizon/stride + 1
    CHECK(tr.energy.size() == tr.frames.size());
    CHECK(tr.cv.size() == tr.frames.size());
  }
}

TEST_CASE("steering pulls the cv towards the target") {
  const auto sys = systems::SystemSpec::double_well_1d(5.0);
  dynamics::LangevinParams lp;
  lp.dt = 2e-3;
  lp.gamma = 2.0;
  lp.temperature = 0.5;
  lp.masses = sys.masses;
  auto enc = linear_1d_cv(1.0, 0.0);
  SmdConfig cfg;
  cfg.k = 50.0;
  cfg.horizon_steps = 5000;
  cfg.s_initial = 1.0;
  cfg.s_target = -1.0;
  cfg.n_replicas = 4;
  cfg.seed = 8;
  cfg.record_stride = 100;
  const auto run = run_smd(sys, cvmodels::cv_function(enc), lp, cfg, {{1.0}});
  for (const auto& tr : run.replicas) CHECK(tr.cv.back() < -0.7);
}

TEST_CASE("opes empty-state bias hits the barrier floor") {
  // epsilon = exp(-beta barrier / (1 - 1/gamma)); with beta=1, barrier=10,
  // gamma=10 that is e^{-100/9} and V = -barrier exactly
  OpesConfig cfg = base_opes(1.0, 10.0, 0.1);
  cfg.gamma = 10.0;
  CHECK(cfg.resolved_epsilon() == doctest::Approx(std::exp(-100.0 / 9.0)).epsilon(1e-14));
  OpesState empty;
  const auto b = opes_bias(empty, 0.37, cfg);
  CHECK(b.v == doctest::Approx(-10.0).epsilon(1e-12));
  CHECK(b.dvds == 0.0);
}

TEST_CASE("opes single-kernel closed form") {
  OpesConfig cfg = base_opes(1.0, 10.0, 0.1);
  cfg.gamma = 10.0;
  OpesState st;
  st.kernels = {{0.0, 1.0}};
  st.sum_weights = 1.0;
  st.z = kInvSqrt2Pi / 0.1;  // Z = P(0)
  const double eps = cfg.resolved_epsilon();
  const auto b = opes_bias(st, 0.0, cfg);
  CHECK(b.v == doctest::Approx(0.9 * std::log(1.0 + eps)).epsilon(1e-12));
  CHECK(std::abs(b.dvds) < 1e-12);  // symmetric about the kernel center
}

TEST_CASE("opes bias derivative vanishes at the center of a symmetric set") {
  OpesConfig cfg = base_opes(2.0, 6.0, 0.15);
  OpesState st;
  st.kernels = {{-0.5, 1.0}, {0.5, 1.0}, {0.0, 2.0}};
  st.sum_weights = 4.0;
  st.z = 1.0;
  CHECK(std::abs(opes_bias(st, 0.0, cfg).dvds) < 1e-13);
}

TEST_CASE("opes bias derivative matches finite differences to 1e-8") {
  // probe near kernels, where V actually varies; Richardson-extrapolated
  // central differences keep the oracle itself below the 1e-8 target
  Rng rng(110);
  OpesConfig cfg = base_opes(2.0, 8.0, 0.12);
  for (int rep = 0; rep < 100; ++rep) {
    const auto st = fuzz_state(rng, 3 + static_cast<int>(rng.uniform() * 20), cfg.sigma);
    const auto& anchor = st.kernels[static_cast<std::size_t>(rng.uniform() * st.kernels.size())];
    const double s = anchor.center + (rng.uniform() - 0.5) * 4.0 * cfg.sigma;
    const auto b = opes_bias(st, s, cfg);
    auto fd_at = [&](double h) {
      return (opes_bias(st, s + h, cfg).v - opes_bias(st, s - h, cfg).v) / (2.0 * h);
    };
    const double h = 1e-4;
    const double fd = (4.0 * fd_at(h / 2) - fd_at(h)) / 3.0;
    CHECK(oracles::rel_err(b.dvds, fd, 1e-9) < 1e-8);
  }
}

TEST_CASE("eq-13 floor and eq-12 normalization under fuzzing") {
  Rng rng(111);
  for (int rep = 0; rep < 50; ++rep) {
    OpesConfig cfg = base_opes(0.5 + 2.0 * rng.uniform(), 4.0 + 8.0 * rng.uniform(),
                               0.05 + 0.2 * rng.uniform());
    const auto st = fuzz_state(rng, 1 + static_cast<int>(rng.uniform() * 30), cfg.sigma);
    // bias floor
    for (int i = 0; i < 200; ++i) {
      const double s = 8.0 * rng.uniform() - 4.0;
      CHECK(opes_bias(st, s, cfg).v >= -cfg.barrier - 1e-9);
    }
    // kernel-density normalization by Simpson quadrature
    const double lo = -2.0 - 12.0 * cfg.sigma, hi = 2.0 + 12.0 * cfg.sigma;
    const int n = 20000;
    const double h = (hi - lo) / n;
    double integral = 0.0;
    auto p_of = [&](double s) {
      double num = 0.0;
      for (const auto& k : st.kernels) {
        const double z = (s - k.center) / cfg.sigma;
        num += k.weight * kInvSqrt2Pi / cfg.sigma * std::exp(-0.5 * z * z);
      }
      return num / st.sum_weights;
    };
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      integral += w * p_of(lo + i * h);
    }
    integral *= h / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("deposits: first weight, monotone growth, z oracle") {
  OpesConfig cfg = base_opes(1.0, 10.0, 0.1);
  cfg.gamma = 10.0;
  OpesState st;

  opes_deposit(st, 0.2, cfg);
  CHECK(st.kernels.size() == 1);
  CHECK(st.kernels[0].weight == doctest::Approx(std::exp(-10.0)).epsilon(1e-12));
  CHECK(st.z > 0.0);

  // repeated deposits at one point grow the weight while the bias still
  // builds against Z; once every center coincides, P/Z pins to 1 and the
  // weights saturate (the quasi-static cap), so later deposits only hold
  double prev = st.kernels[0].weight;
  for (int i = 0; i < 10; ++i) {
    opes_deposit(st, 0.2, cfg);
    if (i == 0)
      CHECK(st.kernels.back().weight > prev);
    else
      CHECK(st.kernels.back().weight >= prev * (1.0 - 1e-14));  // ulp slack at the cap
    prev = st.kernels.back().weight;
  }

  // the saturated weight is the quasi-static cap e^{beta kappa ln(1 + eps)}
  const double kappa = (1.0 - 1.0 / cfg.resolved_gamma()) / cfg.beta;
  const double cap = std::exp(cfg.beta * kappa * std::log(1.0 + cfg.resolved_epsilon()));
  CHECK(st.kernels.back().weight == doctest::Approx(cap).epsilon(1e-12));

  // z equals the independently recomputed mean of P over centers
  Rng rng(112);
  for (int i = 0; i < 30; ++i) opes_deposit(st, 0.4 * rng.gaussian(), cfg);
  double z_check = 0.0;
  for (const auto& kj : st.kernels) {
    double num = 0.0;
    for (const auto& kk : st.kernels) {
      const double z = (kj.center - kk.center) / cfg.sigma;
      num += kk.weight * kInvSqrt2Pi / cfg.sigma * std::exp(-0.5 * z * z);
    }
    z_check += num / st.sum_weights;
  }
  z_check /= static_cast<double>(st.kernels.size());
  CHECK(oracles::rel_err(st.z, z_check, 1e-300) < 1e-12);
}

TEST_CASE("opes run with pace beyond the horizon reduces to unbiased dynamics") {
  const auto sys = systems::SystemSpec::double_well_1d();
  dynamics::LangevinParams lp;
  lp.dt = 1e-3;
  lp.gamma = 1.0;
  lp.temperature = 1.0;
  lp.masses = sys.masses;

  OpesConfig cfg = base_opes(1.0, 8.0, 0.1);
  cfg.total_steps = 2000;
  cfg.pace = 2001;
  cfg.record_stride = 100;
  cfg.seed = 77;

  const auto res = run_opes(sys, cvmodels::basin_coordinate_cv(sys), lp, cfg, {1.0});
  CHECK(res.state.kernels.empty());

  dynamics::LangevinParams lp2 = lp;
  lp2.seed = cfg.seed;
  const auto ref = dynamics::run(sys, lp2, {1.0}, 2000, 100);
  REQUIRE(res.traj.frames.size() == ref.frames.size());
  for (std::size_t i = 0; i < ref.frames.size(); ++i)
    CHECK(res.traj.frames[i] == ref.frames[i]);
}

TEST_CASE("opes drives barrier crossings the unbiased run never makes") {
  const auto sys = systems::SystemSpec::double_well_1d(5.0);  // barrier ~8.3 kT
  dynamics::LangevinParams lp;
  lp.dt = 2e-3;
  lp.gamma = 1.0;
  lp.temperature = 0.6;
  lp.masses = sys.masses;

  OpesConfig cfg = base_opes(1.0, 8.0, 0.1);
  cfg.total_steps = 200000;
  cfg.pace = 500;
  cfg.record_stride = 100;
  cfg.seed = 31;
  cfg.grid_lo = -3.0;
  cfg.grid_hi = 3.0;

  const auto res = run_opes(sys, cvmodels::basin_coordinate_cv(sys), lp, cfg, {1.0});
  int crossings = 0;
  for (std::size_t i = 1; i < res.traj.cv.size(); ++i)
    if ((res.traj.cv[i] >= 0) != (res.traj.cv[i - 1] >= 0)) ++crossings;
  CHECK(crossings >= 10);

  // the recorded bias respects the floor
  for (double v : res.traj.bias) CHECK(v >= -cfg.barrier - 1e-9);

  // unbiased counterpart stays put
  dynamics::LangevinParams lp2 = lp;
  lp2.seed = cfg.seed;
  const auto ref = dynamics::run(sys, lp2, {1.0}, 200000, 100);
  int ref_crossings = 0;
  for (std::size_t i = 1; i < ref.frames.size(); ++i)
    if ((ref.frames[i][0] >= 0) != (ref.frames[i - 1][0] >= 0)) ++ref_crossings;
  CHECK(ref_crossings <= 2);
}

TEST_CASE("opes runs are bit-reproducible per seed") {
  const auto sys = systems::SystemSpec::double_well_1d();
  dynamics::LangevinParams lp;
  lp.dt = 2e-3;
  lp.masses = sys.masses;
  OpesConfig cfg = base_opes(1.0, 8.0, 0.1);
  cfg.total_steps = 5000;
  cfg.pace = 200;
  cfg.record_stride = 100;
  cfg.seed = 91;
  const auto a = run_opes(sys, cvmodels::basin_coordinate_cv(sys), lp, cfg, {1.0});
  const auto b = run_opes(sys, cvmodels::basin_coordinate_cv(sys), lp, cfg, {1.0});
  REQUIRE(a.traj.frames.size() == b.traj.frames.size());
  for (std::size_t i = 0; i < a.traj.frames.size(); ++i)
    CHECK(a.traj.frames[i] == b.traj.frames[i]);
  CHECK(a.state.kernels.size() == b.state.kernels.size());
  for (std::size_t i = 0; i < a.state.kernels.size(); ++i) {
    CHECK(a.state.kernels[i].center == b.state.kernels[i].center);
    CHECK(a.state.kernels[i].weight == b.state.kernels[i].weight);
  }
}

TEST_CASE("opes config validation") {
  OpesConfig cfg = base_opes(1.0, 10.0, 0.1);
  cfg.gamma = 0.5;  // would not broaden
  OpesState st;
  CHECK_THROWS_AS(opes_bias(st, 0.0, cfg), ContractError);
  cfg.gamma = 0.0;
  cfg.beta = 0.05;  // auto gamma = beta * barrier = 0.5 <= 1
  CHECK_THROWS_AS(opes_bias(st, 0.0, cfg), ContractError);
}
