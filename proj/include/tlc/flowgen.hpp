// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tlc/common.hpp"
#include "tlc/cvmodels.hpp"
#include "tlc/dynamics.hpp"
#include "tlc/nn.hpp"
#include "tlc/rng.hpp"

namespace tlc::flowgen {

// Conditional vector field v(x_r, r | s) as a dense net on
// concat(features, r, s); generates time-lagged feature vectors by ODE
// integration from a standard Gaussian prior.
struct FlowModel {
  nn::DenseNet net;
  double sigma = 0.05;
  int feature_dim = 0;  // net maps feature_dim + 2 -> feature_dim
};

struct TlcConfig {
  std::int64_t tau_steps = 0;  // recorded for provenance; pairs carry the lag
  double lambda = 0.1;
  double sigma = 0.05;
  double lr = 1e-3;
  int batch_size = 256;
  int n_iters = 8000;
  int ode_steps = 100;
  std::uint64_t seed = 0;
  std::vector<int> flow_hidden{64, 64};
  std::vector<int> encoder_hidden{64, 64};
  bool zero_condition = false;  // train the unconditional flow (s fed as 0)
};

// One draw of the conditional path: x_r ~ N(r x1 + (1-r) x0, sigma^2),
// target velocity u = x1 - x0 (independent of r).
struct FlowMatchSample {
  std::vector<double> x0;
  std::vector<double> x1;
  std::vector<double> xr;
  double r = 0.0;
  std::vector<double> u;
};

FlowMatchSample sample_path(const std::vector<double>& x1, Rng& rng, double sigma);

struct TlcLossValue {
  double cfm = 0.0;
  double ac = 0.0;
  double total = 0.0;
  bool degenerate_ac = false;  // zero-variance CV batch; ac contributed 0
};

// Batch loss: l_cfm = mean ||v(x_r, r | s_t) - (x1 - x0)||^2 with s_t the raw
// encoder output of x_t, l_ac = -Pearson(s_t, s_{t+tau}), total = cfm +
// lambda * ac. Draws (r, x0, noise) from rng in batch order; copy the rng to
// replay a batch.
TlcLossValue tlc_loss(const FlowModel& flow, const cvmodels::CvEncoder& encoder,
                      const std::vector<Configuration>& x_t,
                      const std::vector<Configuration>& x_tau, double lambda, Rng& rng);

// Same loss on pre-featurized samples, optionally accumulating exact
// gradients for both networks (conditioning path and autocorrelation path
// both reach the encoder). The encoder may consume its own feature
// convention; f_tau_flow holds the generation targets in the flow's feature
// space (identical to f_tau in the default aligned-coordinate setup).
TlcLossValue tlc_loss_features(const FlowModel& flow, const nn::DenseNet& encoder_net,
                               const std::vector<std::vector<double>>& f_t,
                               const std::vector<std::vector<double>>& f_tau,
                               const std::vector<std::vector<double>>& f_tau_flow, double lambda,
                               bool zero_condition, Rng& rng, nn::Gradients* flow_grads,
                               nn::Gradients* encoder_grads);

struct TlcResult {
  FlowModel flow;
  cvmodels::CvEncoder encoder;
  // rows of (iter, l_cfm, l_ac, l_total)
  std::vector<std::array<double, 4>> loss_history;
};

// Joint training of the flow and the CV encoder on time-lagged pairs,
// followed by encoder calibration on the x_t side of the dataset.
TlcResult train_tlc(const dynamics::PairDataset& pairs, const cvmodels::Featurizer& feat,
                    const TlcConfig& cfg, const std::vector<Configuration>& basin_a_samples);

// Variant with distinct conventions: the flow always generates in its own
// (aligned-coordinate) feature space while the encoder may consume a
// different representation, e.g. pairwise distances.
TlcResult train_tlc(const dynamics::PairDataset& pairs,
                    const cvmodels::Featurizer& encoder_feat,
                    const cvmodels::Featurizer& flow_feat, const TlcConfig& cfg,
                    const std::vector<Configuration>& basin_a_samples);

// Integrate dx/dr = v(x, r | s) from a Gaussian prior draw over r in [0,1]
// with fixed-step RK4; returns x(1) in feature space.
std::vector<double> generate(const FlowModel& flow, double s, int ode_steps, Rng& rng);

// Flow checkpoint with {sigma, condition_dim, feature convention, paired
// encoder checksum} extras.
void save_flow(const std::string& path, const FlowModel& flow,
               std::uint64_t paired_encoder_checksum);
FlowModel load_flow(const std::string& path, std::uint64_t* paired_encoder_checksum = nullptr);

// Checksum of an encoder checkpoint document, for pairing validation.
std::uint64_t encoder_checksum(const cvmodels::CvEncoder& enc);

}  // namespace tlc::flowgen
