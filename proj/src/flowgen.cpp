// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/flowgen.hpp"

#include <array>
#include <cmath>

#include "tlc/io.hpp"
#include "tlc/stats.hpp"

namespace tlc::flowgen {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_flow(const FlowModel& flow) {
  require(flow.sigma > 0.0, "FlowModel: sigma must be > 0");
  require(flow.net.input_dim() == flow.feature_dim + 2,
          "FlowModel: net input must be feature_dim + 2");
  require(flow.net.output_dim() == flow.feature_dim,
          "FlowModel: net output must be feature_dim");
}

}  // namespace

FlowMatchSample sample_path(const std::vector<double>& x1, Rng& rng, double sigma) {
  require(sigma > 0.0, "sample_path: sigma must be > 0");
  const std::size_t d = x1.size();
  FlowMatchSample s;
  s.x1 = x1;
  s.r = rng.uniform();
  s.x0.resize(d);
  for (auto& v : s.x0) v = rng.gaussian();
  s.xr.resize(d);
  for (std::size_t j = 0; j < d; ++j)
    s.xr[j] = s.r * x1[j] + (1.0 - s.r) * s.x0[j] + sigma * rng.gaussian();
  s.u.resize(d);
  for (std::size_t j = 0; j < d; ++j) s.u[j] = x1[j] - s.x0[j];
  return s;
}

TlcLossValue tlc_loss_features(const FlowModel& flow, const nn::DenseNet& encoder_net,
                               const std::vector<std::vector<double>>& f_t,
                               const std::vector<std::vector<double>>& f_tau,
                               const std::vector<std::vector<double>>& f_tau_flow, double lambda,
                               bool zero_condition, Rng& rng, nn::Gradients* flow_grads,
                               nn::Gradients* encoder_grads) {
  check_flow(flow);
  require(f_t.size() == f_tau.size() && f_t.size() == f_tau_flow.size(),
          "tlc_loss: side size mismatch");
  require(f_t.size() >= 2, "tlc_loss: batch size must be >= 2");
  require(encoder_net.output_dim() == 1, "tlc_loss: encoder must be scalar");
  const std::size_t b = f_t.size();
  const int d = flow.feature_dim;
  const double inv_b = 1.0 / static_cast<double>(b);
  const bool want_grads = flow_grads != nullptr || encoder_grads != nullptr;

  // batch draws in sample order: r, x0, path noise
  std::vector<double> rs(b);
  std::vector<std::vector<double>> x0(b), xr(b);
  for (std::size_t i = 0; i < b; ++i) {
    rs[i] = rng.uniform();
    x0[i].resize(static_cast<std::size_t>(d));
    for (auto& v : x0[i]) v = rng.gaussian();
    xr[i].resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      xr[i][j] =
          rs[i] * f_tau_flow[i][j] + (1.0 - rs[i]) * x0[i][j] + flow.sigma * rng.gaussian();
  }

  // encoder on both sides
  nn::Workspace enc_ws, flow_ws, scratch;
  std::vector<double> s_t(b), s_tau(b);
  for (std::size_t i = 0; i < b; ++i) {
    s_t[i] = nn::forward(encoder_net, f_t[i], enc_ws)[0];
    s_tau[i] = nn::forward(encoder_net, f_tau[i], enc_ws)[0];
  }
  auto rho = stats::pearson_with_grad(s_t, s_tau, want_grads);

  TlcLossValue loss;
  loss.degenerate_ac = rho.degenerate;
  loss.ac = rho.degenerate ? 0.0 : -rho.value;

  std::vector<double> input(static_cast<std::size_t>(d) + 2);
  std::vector<double> upstream(static_cast<std::size_t>(d));
  std::vector<double> gin;
  double cfm = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (int j = 0; j < d; ++j) input[j] = xr[i][j];
    input[d] = rs[i];
    input[d + 1] = zero_condition ? 0.0 : s_t[i];
    const auto& v = nn::forward(flow.net, input, flow_ws);
    double g_cond = 0.0;
    for (int j = 0; j < d; ++j) {
      const double res = v[j] - (f_tau_flow[i][j] - x0[i][j]);
      cfm += res * res;
      upstream[j] = 2.0 * res * inv_b;
    }
    if (want_grads) {
      require(flow_grads != nullptr && encoder_grads != nullptr,
              "tlc_loss: gradient accumulation needs both nets");
      nn::backward(flow.net, flow_ws, upstream, *flow_grads, &gin, scratch);
      g_cond = gin[d + 1];
      {
        // conditioning path + autocorrelation path into the encoder at x_t
        const double up_t =
            (zero_condition ? 0.0 : g_cond) - lambda * (rho.degenerate ? 0.0 : rho.grad_a[i]);
        nn::forward(encoder_net, f_t[i], enc_ws);
        nn::backward(encoder_net, enc_ws, {up_t}, *encoder_grads, nullptr, scratch);
        const double up_tau = -lambda * (rho.degenerate ? 0.0 : rho.grad_b[i]);
        if (up_tau != 0.0) {
          nn::forward(encoder_net, f_tau[i], enc_ws);
          nn::backward(encoder_net, enc_ws, {up_tau}, *encoder_grads, nullptr, scratch);
        }
      }
    }
  }
  loss.cfm = cfm * inv_b;
  loss.total = loss.cfm + lambda * loss.ac;
  return loss;
}

TlcLossValue tlc_loss(const FlowModel& flow, const cvmodels::CvEncoder& encoder,
                      const std::vector<Configuration>& x_t,
                      const std::vector<Configuration>& x_tau, double lambda, Rng& rng) {
  std::vector<std::vector<double>> ft, ftau;
  ft.reserve(x_t.size());
  ftau.reserve(x_tau.size());
  for (const auto& c : x_t) ft.push_back(encoder.featurizer.features(c));
  for (const auto& c : x_tau) ftau.push_back(encoder.featurizer.features(c));
  require(encoder.featurizer.feature_dim() == flow.feature_dim,
          "tlc_loss: encoder and flow feature conventions differ; featurize separately");
  return tlc_loss_features(flow, encoder.net, ft, ftau, ftau, lambda, false, rng, nullptr,
                           nullptr);
}

TlcResult train_tlc(const dynamics::PairDataset& pairs, const cvmodels::Featurizer& feat,
                    const TlcConfig& cfg, const std::vector<Configuration>& basin_a_samples) {
  return train_tlc(pairs, feat, feat, cfg, basin_a_samples);
}

TlcResult train_tlc(const dynamics::PairDataset& pairs,
                    const cvmodels::Featurizer& encoder_feat,
                    const cvmodels::Featurizer& flow_feat, const TlcConfig& cfg,
                    const std::vector<Configuration>& basin_a_samples) {
  require(!pairs.x_t.empty(), "train_tlc: empty pair dataset");
  require(cfg.batch_size >= 2, "train_tlc: batch_size must be >= 2");
  const int d = flow_feat.feature_dim();
  const int de = encoder_feat.feature_dim();

  std::vector<std::vector<double>> ft, ftau, ftau_flow;
  ft.reserve(pairs.x_t.size());
  ftau.reserve(pairs.x_tau.size());
  ftau_flow.reserve(pairs.x_tau.size());
  const bool shared = encoder_feat.mode == flow_feat.mode;
  for (const auto& c : pairs.x_t) ft.push_back(encoder_feat.features(c));
  for (const auto& c : pairs.x_tau) {
    ftau.push_back(encoder_feat.features(c));
    ftau_flow.push_back(shared ? ftau.back() : flow_feat.features(c));
  }

  std::vector<int> flow_sizes{d + 2};
  for (int h : cfg.flow_hidden) flow_sizes.push_back(h);
  flow_sizes.push_back(d);
  std::vector<int> enc_sizes{de};
  for (int h : cfg.encoder_hidden) enc_sizes.push_back(h);
  enc_sizes.push_back(1);

  FlowModel flow;
  flow.sigma = cfg.sigma;
  flow.feature_dim = d;
  flow.net = nn::init(flow_sizes, nn::Activation::Tanh, mix_seed(cfg.seed, 1));
  nn::DenseNet enc_net = nn::init(enc_sizes, nn::Activation::Tanh, mix_seed(cfg.seed, 2));

  nn::AdamState flow_adam = nn::AdamState::for_net(flow.net, cfg.lr);
  nn::AdamState enc_adam = nn::AdamState::for_net(enc_net, cfg.lr);
  nn::Gradients flow_grads = nn::Gradients::zeros_like(flow.net);
  nn::Gradients enc_grads = nn::Gradients::zeros_like(enc_net);

  Rng batch_rng(mix_seed(cfg.seed, 3));
  Rng path_rng(mix_seed(cfg.seed, 4));

  const std::size_t n = ft.size();
  std::vector<std::vector<double>> bft(static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::vector<double>> bftau(static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::vector<double>> bftau_flow(static_cast<std::size_t>(cfg.batch_size));

  TlcResult out;
  out.loss_history.reserve(static_cast<std::size_t>(cfg.n_iters));
  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    for (int k = 0; k < cfg.batch_size; ++k) {
      const std::size_t i = std::min(static_cast<std::size_t>(batch_rng.uniform() * n), n - 1);
      bft[static_cast<std::size_t>(k)] = ft[i];
      bftau[static_cast<std::size_t>(k)] = ftau[i];
      bftau_flow[static_cast<std::size_t>(k)] = ftau_flow[i];
    }
    const auto loss =
        tlc_loss_features(flow, enc_net, bft, bftau, bftau_flow, cfg.lambda,
                          cfg.zero_condition, path_rng, &flow_grads, &enc_grads);
    if (!std::isfinite(loss.total))
      throw NumericsError("train_tlc: diverged at iteration " + std::to_string(iter));
    nn::adam_update(flow.net, flow_grads, flow_adam);
    nn::adam_update(enc_net, enc_grads, enc_adam);
    flow_grads.reset();
    enc_grads.reset();
    out.loss_history.push_back(
        {static_cast<double>(iter), loss.cfm, loss.ac, loss.total});
  }

  out.flow = std::move(flow);
  out.encoder =
      cvmodels::CvEncoder{std::move(enc_net), encoder_feat, cvmodels::Calibration::identity()};
  cvmodels::calibrate(out.encoder, pairs.x_t, basin_a_samples);
  return out;
}

std::vector<double> generate(const FlowModel& flow, double s, int ode_steps, Rng& rng) {
  check_flow(flow);
  require(ode_steps >= 1, "generate: ode_steps must be >= 1");
  const int d = flow.feature_dim;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (auto& v : x) v = rng.gaussian();

  nn::Workspace ws;
  std::vector<double> input(static_cast<std::size_t>(d) + 2);
  auto field = [&](const std::vector<double>& xi, double r) -> std::vector<double> {
    for (int j = 0; j < d; ++j) input[j] = xi[j];
    input[d] = r;
    input[d + 1] = s;
    return nn::forward(flow.net, input, ws);
  };

  const double h = 1.0 / static_cast<double>(ode_steps);
  std::vector<double> xt(static_cast<std::size_t>(d));
  for (int step = 0; step < ode_steps; ++step) {
    const double r = step * h;
    const auto k1 = field(x, r);
    for (int j = 0; j < d; ++j) xt[j] = x[j] + 0.5 * h * k1[j];
    const auto k2 = field(xt, r + 0.5 * h);
    for (int j = 0; j < d; ++j) xt[j] = x[j] + 0.5 * h * k2[j];
    const auto k3 = field(xt, r + 0.5 * h);
    for (int j = 0; j < d; ++j) xt[j] = x[j] + h * k3[j];
    const auto k4 = field(xt, r + h);
    for (int j = 0; j < d; ++j)
      x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (!all_finite(x))
      throw NumericsError("generate: diverged at ODE step " + std::to_string(step));
  }
  return x;
}

std::uint64_t encoder_checksum(const cvmodels::CvEncoder& enc) {
  nlohmann::json extras;
  extras["input_mode"] = cvmodels::to_string(enc.featurizer.mode);
  extras["reference"] = enc.featurizer.reference;
  const std::string doc = nn::to_checkpoint(enc.net, extras).dump();
  return fnv1a64(doc);
}

void save_flow(const std::string& path, const FlowModel& flow,
               std::uint64_t paired_encoder_checksum) {
  nlohmann::json extras;
  extras["sigma"] = flow.sigma;
  extras["condition_dim"] = 1;
  extras["feature_dim"] = flow.feature_dim;
  extras["feature_convention"] = "aligned_coords";
  extras["paired_encoder_checksum"] = hex64(paired_encoder_checksum);
  nn::save_checkpoint(path, flow.net, std::move(extras));
}

FlowModel load_flow(const std::string& path, std::uint64_t* paired_encoder_checksum) {
  nlohmann::json extras;
  FlowModel flow;
  flow.net = nn::load_checkpoint(path, &extras);
  flow.sigma = extras.at("sigma").get<double>();
  flow.feature_dim = extras.at("feature_dim").get<int>();
  if (paired_encoder_checksum != nullptr)
    *paired_encoder_checksum =
        std::stoull(extras.at("paired_encoder_checksum").get<std::string>(), nullptr, 16);
  check_flow(flow);
  return flow;
}

}  // namespace tlc::flowgen
