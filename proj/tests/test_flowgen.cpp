// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "tlc/dynamics.hpp"
#include "tlc/flowgen.hpp"
#include "tlc/stats.hpp"
#include "tlc/systems.hpp"

using namespace tlc;
using namespace tlc::flowgen;

namespace {

FlowModel tiny_flow(int d, std::uint64_t seed, double sigma = 0.05) {
  FlowModel f;
  f.feature_dim = d;
  f.sigma = sigma;
  f.net = nn::init({d + 2, 6, d}, nn::Activation::Tanh, seed);
  return f;
}

nn::DenseNet tiny_encoder(int d, std::uint64_t seed) {
  return nn::init({d, 5, 1}, nn::Activation::Tanh, seed);
}

std::vector<std::vector<double>> random_batch(Rng& rng, int n, int d) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
  for (auto& row : out) {
    row.resize(static_cast<std::size_t>(d));
    for (auto& v : row) v = rng.gaussian();
  }
  return out;
}

}  // namespace

TEST_CASE("sample_path endpoints and target") {
  Rng rng(80);
  const std::vector<double> x1{1.0, -2.0, 0.5};
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = sample_path(x1, rng, 1e-300);
    for (std::size_t j = 0; j < x1.size(); ++j) {
      // u = x1 - x0 exactly, independent of r
      CHECK(s.u[j] == x1[j] - s.x0[j]);
      // with sigma -> 0 the interpolant is exact
      CHECK(std::abs(s.xr[j] - (s.r * x1[j] + (1.0 - s.r) * s.x0[j])) < 1e-250);
    }
  }
}

TEST_CASE("sample_path mean matches r*x1 over many draws") {
  Rng rng(81);
  const std::vector<double> x1{2.0, -1.0};
  const int n = 100000;
  // condition on r by construction: fix r via repeated draws and average x_r - r*x1
  double acc0 = 0.0, acc1 = 0.0, wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_path(x1, rng, 0.05);
    acc0 += s.xr[0] - s.r * x1[0];
    acc1 += s.xr[1] - s.r * x1[1];
    wsum += 1.0;
  }
  // E[x_r - r x1] = E[(1-r) x0] + sigma E[xi] = 0
  const double se = std::sqrt((1.0 / 3.0 + 0.05 * 0.05) / n);  // Var[(1-r)x0] = 1/3
  CHECK(std::abs(acc0 / wsum) < 4 * se);
  CHECK(std::abs(acc1 / wsum) < 4 * se);
}

TEST_CASE("u is bit-identical across r draws for fixed endpoints") {
  Rng rng(82);
  const std::vector<double> x1{0.3, 0.7};
  std::vector<double> u0;
  for (int rep = 0; rep < 50; ++rep) {
    Rng local(1234);  // same x0 stream every time
    const auto s = sample_path(x1, local, 0.1);
    if (rep == 0)
      u0 = s.u;
    else
      CHECK(s.u == u0);
  }
}

TEST_CASE("tlc loss: exact-field and perfect-correlation limits") {
  const int d = 2;
  Rng rng(83);
  const auto ft = random_batch(rng, 8, d);
  auto ftau = ft;  // s_t == s_tau per sample

  // encoder with nonzero batch variance
  auto enc = tiny_encoder(d, 3);

  // flow whose net ignores inputs and returns zero: l_cfm = mean ||x1-x0||^2
  FlowModel zero = tiny_flow(d, 4);
  for (auto& w : zero.net.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : zero.net.biases) std::fill(b.begin(), b.end(), 0.0);

  Rng draw(99);
  Rng replay = draw;
  const auto loss = tlc_loss_features(zero, enc, ft, ftau, ftau, 0.5, false, draw, nullptr, nullptr);
  CHECK(loss.cfm > 0.0);
  CHECK(loss.ac == doctest::Approx(-1.0).epsilon(1e-12));  // identical batches correlate fully
  CHECK(loss.total == doctest::Approx(loss.cfm + 0.5 * loss.ac));

  // independently recompute l_cfm from the replayed draws
  double want = 0.0;
  for (std::size_t i = 0; i < ft.size(); ++i) {
    const double r = replay.uniform();
    (void)r;
    std::vector<double> x0(d), xr(d);
    for (auto& v : x0) v = replay.gaussian();
    for (int j = 0; j < d; ++j) {
      xr[j] = replay.gaussian();  // consume the path noise draws
      (void)xr[j];
      const double u = ftau[i][j] - x0[j];
      want += u * u;
    }
  }
  want /= static_cast<double>(ft.size());
  CHECK(loss.cfm == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("autocorrelation equals an independent pearson formula") {
  const int d = 3;
  Rng rng(84);
  const auto ft = random_batch(rng, 64, d);
  const auto ftau = random_batch(rng, 64, d);
  const auto enc = tiny_encoder(d, 5);
  const auto flow = tiny_flow(d, 6);

  Rng draw(7);
  const auto loss = tlc_loss_features(flow, enc, ft, ftau, ftau, 1.0, false, draw, nullptr, nullptr);

  // direct formula, separately coded
  std::vector<double> st, stau;
  for (std::size_t i = 0; i < ft.size(); ++i) {
    st.push_back(nn::forward(enc, ft[i])[0]);
    stau.push_back(nn::forward(enc, ftau[i])[0]);
  }
  const double n = static_cast<double>(st.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    ma += st[i] / n;
    mb += stau[i] / n;
  }
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    cov += (st[i] - ma) * (stau[i] - mb);
    va += (st[i] - ma) * (st[i] - ma);
    vb += (stau[i] - mb) * (stau[i] - mb);
  }
  const double pearson = cov / std::sqrt(va * vb);
  CHECK(std::abs(loss.ac + pearson) < 1e-12);
}

TEST_CASE("loss bounds hold under fuzzing") {
  Rng rng(85);
  for (int rep = 0; rep < 300; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform() * 4);
    const int b = 2 + static_cast<int>(rng.uniform() * 8);
    const auto ft = random_batch(rng, b, d);
    const auto ftau = random_batch(rng, b, d);
    const auto enc = tiny_encoder(d, rng.next_u64());
    const auto flow = tiny_flow(d, rng.next_u64());
    Rng draw(rng.next_u64());
    const auto loss = tlc_loss_features(flow, enc, ft, ftau, ftau, 0.3, false, draw, nullptr, nullptr);
    CHECK(loss.cfm >= 0.0);
    CHECK(loss.ac >= -1.0 - 1e-12);
    CHECK(loss.ac <= 1.0 + 1e-12);
  }
}

TEST_CASE("degenerate cv batches contribute zero autocorrelation") {
  const int d = 2;
  Rng rng(86);
  const auto ft = random_batch(rng, 8, d);
  const auto ftau = random_batch(rng, 8, d);
  auto enc = tiny_encoder(d, 9);
  for (auto& w : enc.weights) std::fill(w.begin(), w.end(), 0.0);  // constant encoder
  const auto flow = tiny_flow(d, 10);
  Rng draw(11);
  const auto loss = tlc_loss_features(flow, enc, ft, ftau, ftau, 1.0, false, draw, nullptr, nullptr);
  CHECK(loss.degenerate_ac);
  CHECK(loss.ac == 0.0);
  CHECK(std::isfinite(loss.total));
}

TEST_CASE("joint loss gradients match finite differences (conditioning path)") {
  // the method's crux: d l_total / d encoder params through both the
  // condition input of the flow and the autocorrelation term
  const int d = 2;
  Rng rng(87);
  const auto ft = random_batch(rng, 6, d);
  const auto ftau = random_batch(rng, 6, d);

  for (int rep = 0; rep < 10; ++rep) {
    auto enc = tiny_encoder(d, rng.next_u64());
    auto flow = tiny_flow(d, rng.next_u64());
    const double lambda = 0.25;
    Rng base(1000 + rep);

    auto enc_grads = nn::Gradients::zeros_like(enc);
    auto flow_grads = nn::Gradients::zeros_like(flow.net);
    {
      Rng draw = base;
      tlc_loss_features(flow, enc, ft, ftau, ftau, lambda, false, draw, &flow_grads, &enc_grads);
    }

    const double h = 1e-6;
    double worst = 0.0;
    auto loss_at = [&]() {
      Rng draw = base;  // identical path draws for every probe
      return tlc_loss_features(flow, enc, ft, ftau, ftau, lambda, false, draw, nullptr, nullptr).total;
    };
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
      for (std::size_t i = 0; i < enc.weights[l].size(); ++i) {
        const double orig = enc.weights[l][i];
        enc.weights[l][i] = orig + h;
        const double fp = loss_at();
        enc.weights[l][i] = orig - h;
        const double fm = loss_at();
        enc.weights[l][i] = orig;
        worst = std::max(worst, oracles::rel_err(enc_grads.weights[l][i], (fp - fm) / (2 * h), 1e-6));
      }
      for (std::size_t i = 0; i < enc.biases[l].size(); ++i) {
        const double orig = enc.biases[l][i];
        enc.biases[l][i] = orig + h;
        const double fp = loss_at();
        enc.biases[l][i] = orig - h;
        const double fm = loss_at();
        enc.biases[l][i] = orig;
        worst = std::max(worst, oracles::rel_err(enc_grads.biases[l][i], (fp - fm) / (2 * h), 1e-6));
      }
    }
    // flow parameters too
    for (std::size_t l = 0; l < flow.net.weights.size(); ++l) {
      for (std::size_t i = 0; i < flow.net.weights[l].size(); i += 3) {
        const double orig = flow.net.weights[l][i];
        flow.net.weights[l][i] = orig + h;
        const double fp = loss_at();
        flow.net.weights[l][i] = orig - h;
        const double fm = loss_at();
        flow.net.weights[l][i] = orig;
        worst = std::max(worst,
                         oracles::rel_err(flow_grads.weights[l][i], (fp - fm) / (2 * h), 1e-6));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("generate: zero field returns the prior draw") {
  const int d = 3;
  FlowModel flow = tiny_flow(d, 20);
  for (auto& w : flow.net.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : flow.net.biases) std::fill(b.begin(), b.end(), 0.0);
  Rng rng(21);
  Rng replay = rng;
  const auto out = generate(flow, 0.3, 50, rng);
  std::vector<double> prior(d);
  for (auto& v : prior) v = replay.gaussian();
  CHECK(out == prior);
}

TEST_CASE("generate: constant field shifts the prior exactly") {
  const int d = 2;
  FlowModel flow;
  flow.feature_dim = d;
  flow.sigma = 0.1;
  flow.net.layer_sizes = {d + 2, d};
  flow.net.activation = nn::Activation::Identity;
  flow.net.weights = {std::vector<double>(static_cast<std::size_t>(d) * (d + 2), 0.0)};
  flow.net.biases = {{0.7, -1.2}};
  Rng rng(22);
  Rng replay = rng;
  const auto out = generate(flow, 0.0, 17, rng);
  std::vector<double> prior(d);
  for (auto& v : prior) v = replay.gaussian();
  CHECK(out[0] == doctest::Approx(prior[0] + 0.7).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(prior[1] - 1.2).epsilon(1e-14));
}

TEST_CASE("rk4 order: doubling steps shrinks the change by at least 8x") {
  const int d = 3;
  const FlowModel flow = tiny_flow(d, 23, 0.05);
  auto run_with = [&](int steps) {
    Rng rng(24);  // same prior draw
    return generate(flow, 0.4, steps, rng);
  };
  const auto a = run_with(10);
  const auto b = run_with(20);
  const auto c = run_with(40);
  double e1 = 0.0, e2 = 0.0;
  for (int j = 0; j < d; ++j) {
    e1 += (a[j] - b[j]) * (a[j] - b[j]);
    e2 += (b[j] - c[j]) * (b[j] - c[j]);
  }
  CHECK(std::sqrt(e1) / std::sqrt(e2) >= 8.0);
}

TEST_CASE("train_tlc learns the double well: loss falls, cv tracks x") {
  const auto sys = systems::SystemSpec::double_well_1d(2.0);
  dynamics::LangevinParams lp;
  lp.dt = 5e-3;
  lp.gamma = 1.0;
  lp.temperature = 1.0;
  lp.masses = sys.masses;
  lp.seed = 90;
  const auto t1 = dynamics::run(sys, lp, {1.0}, 30000, 10);
  lp.seed = 91;
  const auto t2 = dynamics::run(sys, lp, {-1.0}, 30000, 10);
  Rng prng(92);
  const auto pairs = dynamics::extract_pairs({t1, t2}, sys, 100, true, 4000, prng);

  std::vector<Configuration> basin_a;
  for (const auto& c : pairs.x_t)
    if (systems::basin_of(sys, c) == systems::BasinLabel::A) basin_a.push_back(c);

  const auto feat = cvmodels::Featurizer::for_system(sys, cvmodels::InputMode::AlignedCoords);
  TlcConfig cfg;
  cfg.lambda = 0.1;
  cfg.batch_size = 64;
  cfg.n_iters = 1200;
  cfg.flow_hidden = {32, 32};
  cfg.encoder_hidden = {16};
  cfg.seed = 93;
  const auto res = train_tlc(pairs, feat, cfg, basin_a);

  double head = 0.0, tail = 0.0;
  const int w = 100;
  for (int i = 0; i < w; ++i) {
    head += res.loss_history[static_cast<std::size_t>(i)][1];
    tail += res.loss_history[res.loss_history.size() - 1 - i][1];
  }
  CHECK(tail < head);  // flow-matching loss decreases

  // calibrated, sign-fixed cv correlates with x on held-out frames
  lp.seed = 94;
  const auto held = dynamics::run(sys, lp, {1.0}, 10000, 10);
  std::vector<double> cv, xs;
  for (const auto& f : held.frames) {
    cv.push_back(cvmodels::encode(res.encoder, f));
    xs.push_back(f[0]);
  }
  CHECK(std::abs(stats::pearson(cv, xs)) > 0.8);
  // basin-A (x > 0) side is positive by the calibration sign convention
  double mean_a = 0.0;
  int na = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] > 0.5) {
      mean_a += cv[i];
      ++na;
    }
  CHECK(mean_a / na > 0.0);
}

TEST_CASE("lambda=0 trains without the autocorrelation term") {
  Rng rng(95);
  dynamics::PairDataset pairs;
  pairs.tau_steps = 1;
  for (int i = 0; i < 64; ++i) {
    pairs.x_t.push_back({rng.gaussian()});
    pairs.x_tau.push_back({rng.gaussian()});
  }
  cvmodels::Featurizer feat;
  feat.mode = cvmodels::InputMode::AlignedCoords;
  feat.reference = {0.0};
  feat.n_particles = 1;
  feat.spatial_dim = 1;
  TlcConfig cfg;
  cfg.lambda = 0.0;
  cfg.batch_size = 16;
  cfg.n_iters = 30;
  cfg.flow_hidden = {8};
  cfg.encoder_hidden = {4};
  cfg.seed = 96;
  std::vector<Configuration> basin_a{{1.0}};
  const auto res = train_tlc(pairs, feat, cfg, basin_a);
  for (const auto& row : res.loss_history) CHECK(row[3] == row[1]);  // total == cfm
}

TEST_CASE("distance-feature encoder trains against an aligned-coordinate flow") {
  // the input-representation ablation: only the encoder switches convention
  const auto sys = systems::SystemSpec::butane4();
  const auto& bp = std::get<systems::Butane4Params>(sys.params);
  Rng rng(97);
  dynamics::PairDataset pairs;
  pairs.tau_steps = 1;
  for (int i = 0; i < 200; ++i) {
    auto c = systems::butane4_chain(bp, -3.1 + 6.2 * rng.uniform());
    for (auto& v : c) v += 0.05 * rng.gaussian();
    pairs.x_t.push_back(c);
    pairs.x_tau.push_back(c);
  }
  std::vector<Configuration> basin_a;
  for (const auto& c : pairs.x_t)
    if (systems::basin_of(sys, c) == systems::BasinLabel::A) basin_a.push_back(c);
  REQUIRE(!basin_a.empty());

  const auto enc_feat =
      cvmodels::Featurizer::for_system(sys, cvmodels::InputMode::PairwiseDistances);
  const auto flow_feat =
      cvmodels::Featurizer::for_system(sys, cvmodels::InputMode::AlignedCoords);
  TlcConfig cfg;
  cfg.lambda = 0.1;
  cfg.batch_size = 32;
  cfg.n_iters = 60;
  cfg.flow_hidden = {16};
  cfg.encoder_hidden = {8};
  cfg.seed = 98;
  const auto res = train_tlc(pairs, enc_feat, flow_feat, cfg, basin_a);
  CHECK(res.flow.feature_dim == 12);
  CHECK(res.encoder.featurizer.feature_dim() == 6);
  CHECK(res.encoder.featurizer.mode == cvmodels::InputMode::PairwiseDistances);
  CHECK(std::isfinite(cvmodels::encode(res.encoder, pairs.x_t.front())));
  for (const auto& row : res.loss_history) CHECK(std::isfinite(row[3]));
}

TEST_CASE("flow checkpoints round-trip with the paired encoder checksum") {
  const auto flow = tiny_flow(4, 30);
  cvmodels::CvEncoder enc;
  enc.featurizer.mode = cvmodels::InputMode::AlignedCoords;
  enc.featurizer.reference = {0, 0, 0, 0};
  enc.featurizer.n_particles = 4;
  enc.featurizer.spatial_dim = 1;
  enc.net = tiny_encoder(4, 31);

  const std::string path = "test_flow.json";
  save_flow(path, flow, encoder_checksum(enc));
  std::uint64_t checksum = 0;
  const auto back = load_flow(path, &checksum);
  CHECK(back.sigma == flow.sigma);
  CHECK(back.feature_dim == flow.feature_dim);
  CHECK(checksum == encoder_checksum(enc));
  for (std::size_t l = 0; l < flow.net.weights.size(); ++l)
    CHECK(back.net.weights[l] == flow.net.weights[l]);
  std::filesystem::remove(path);
}
