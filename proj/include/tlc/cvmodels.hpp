// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tlc/common.hpp"
#include "tlc/dynamics.hpp"
#include "tlc/nn.hpp"
#include "tlc/rng.hpp"
#include "tlc/systems.hpp"

namespace tlc::cvmodels {

enum class InputMode { AlignedCoords, PairwiseDistances };

std::string to_string(InputMode m);
InputMode input_mode_from_string(const std::string& s);

// Configuration -> invariant feature vector. AlignedCoords Kabsch-aligns onto
// the reference (single-particle systems have no rigid symmetry and pass
// through unchanged); PairwiseDistances emits all C(n,2) distances.
struct Featurizer {
  InputMode mode = InputMode::AlignedCoords;
  Configuration reference;
  int n_particles = 1;
  int spatial_dim = 1;

  int feature_dim() const;
  std::vector<double> features(const Configuration& x) const;
  // Chain rule back to configuration space with the alignment rotation frozen
  // at its current value; the centroid subtraction is differentiated, so the
  // returned per-particle gradients sum to zero in aligned mode.
  Configuration pullback_gradient(const Configuration& x, const std::vector<double>& g_feat) const;

  static Featurizer for_system(const systems::SystemSpec& sys, InputMode mode);
};

// Affine relabeling of the raw network output to [-1, 1] on the calibration
// dataset, with the sign fixed so basin A maps positive.
struct Calibration {
  double raw_min = -1.0;
  double raw_max = 1.0;
  double sign = 1.0;

  static Calibration identity() { return {}; }
  double apply(double raw) const {
    return sign * (2.0 * (raw - raw_min) / (raw_max - raw_min) - 1.0);
  }
  double scale() const { return sign * 2.0 / (raw_max - raw_min); }
};

struct CvEncoder {
  nn::DenseNet net;  // scalar output
  Featurizer featurizer;
  Calibration calibration = Calibration::identity();
};

std::vector<double> featurize(const CvEncoder& enc, const Configuration& x);
double raw_cv(const CvEncoder& enc, const Configuration& x);
double encode(const CvEncoder& enc, const Configuration& x);

// d(encode)/dx under the frozen-rotation convention.
Configuration cv_input_gradient(const CvEncoder& enc, const Configuration& x);
// d(encode)/d(features), used for sensitivity reports.
std::vector<double> feature_gradient(const CvEncoder& enc, const Configuration& x);

// raw_min/raw_max from the dataset extremes, sign from the basin-A mean.
// Throws DegenerateError when the encoder is constant on the dataset.
Calibration calibrate(CvEncoder& enc, const std::vector<Configuration>& dataset,
                      const std::vector<Configuration>& basin_a_samples);

struct SensitivityEntry {
  int feature;
  double value;
};
// Mean |d s / d feature| over the dataset, sorted descending.
std::vector<SensitivityEntry> sensitivity(const CvEncoder& enc,
                                          const std::vector<Configuration>& dataset);

// ---------------------------------------------------------------------------
// Trained baselines
// ---------------------------------------------------------------------------

struct TaeConfig {
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::Tanh;
  double lr = 1e-3;
  int batch_size = 128;
  int n_iters = 2000;
  std::uint64_t seed = 0;
};

struct TaeResult {
  CvEncoder encoder;
  nn::DenseNet decoder;
  std::vector<double> loss_history;
};

// Time-lagged autoencoder: reconstruct features of x_{t+tau} from x_t through
// a scalar bottleneck.
TaeResult train_tae(const dynamics::PairDataset& pairs, const Featurizer& feat,
                    const TaeConfig& cfg);

struct VdeConfig {
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::Tanh;
  double lr = 1e-3;
  int batch_size = 128;
  int n_iters = 2000;
  std::uint64_t seed = 0;
  double beta_kl = 1e-3;
  double lambda_ac = 1.0;
  double noise_scale = 1.0;  // 0 disables reparameterization noise
};

struct VdeResult {
  CvEncoder encoder;  // mean head only
  nn::DenseNet decoder;
  std::vector<double> loss_history;
};

// Variational dynamics encoder: (mean, logvar) latent, reconstruction +
// beta_kl * KL(q || N(0,1)) + lambda_ac * (negative latent-mean lag
// autocorrelation).
VdeResult train_vde(const dynamics::PairDataset& pairs, const Featurizer& feat,
                    const VdeConfig& cfg);

// Closed-form KL(N(mu, exp(logvar)) || N(0, 1)).
double gaussian_kl(double mu, double logvar);

struct DeepTdaConfig {
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::Tanh;
  double lr = 1e-3;
  int batch_size = 256;
  int n_iters = 2000;
  std::uint64_t seed = 0;
  double mu_target_a = 7.0;
  double mu_target_b = -7.0;
  double sigma_target = 0.2;
  double alpha = 1.0;
  double beta = 100.0;
};

struct DeepTdaResult {
  CvEncoder encoder;
  std::vector<double> loss_history;
  int skipped_batches = 0;
};

// Discriminative CV: drive per-state batch statistics of the raw CV to the
// target means/stddevs. Batches missing one state are skipped.
DeepTdaResult train_deeptda(const std::vector<Configuration>& configs,
                            const std::vector<systems::BasinLabel>& labels,
                            const Featurizer& feat, const DeepTdaConfig& cfg);

struct LinearCv {
  std::vector<double> direction;  // over input features
  double offset = 0.0;
  std::vector<double> eigenvalues;  // TICA only, sorted descending
};

// Symmetrized time-lagged generalized eigenproblem over standardized features;
// the top eigenvector is scaled to unit variance on the training set.
LinearCv fit_linear_tica_features(const std::vector<std::vector<double>>& f_t,
                                  const std::vector<std::vector<double>>& f_tau, double reg);
LinearCv fit_linear_tica(const dynamics::PairDataset& pairs, const Featurizer& feat, double reg);

// Fisher discriminant on standardized features.
LinearCv fit_lda_features(const std::vector<std::vector<double>>& feats,
                          const std::vector<systems::BasinLabel>& labels, double reg);
LinearCv fit_lda(const std::vector<Configuration>& configs,
                 const std::vector<systems::BasinLabel>& labels, const Featurizer& feat,
                 double reg);

// A linear CV is a single-layer encoder; downstream harnesses consume both
// uniformly.
CvEncoder linear_cv_encoder(const LinearCv& lin, const Featurizer& feat);

// ---------------------------------------------------------------------------
// Generic scalar CV with configuration gradient, the contract shared by SMD
// and OPES drivers (an encoder or the ground-truth coordinate).
// ---------------------------------------------------------------------------
struct CvFunction {
  std::function<double(const Configuration&)> value;
  std::function<Configuration(const Configuration&)> gradient;
};

CvFunction cv_function(const CvEncoder& enc);
// The system's basin coordinate (ground-truth slow coordinate, folded where
// the basin definition folds).
CvFunction basin_coordinate_cv(const systems::SystemSpec& sys);

// Checkpoint persistence: nn format with featurizer/calibration extras.
void save_encoder(const std::string& path, const CvEncoder& enc,
                  nlohmann::json extra_fields = {});
CvEncoder load_encoder(const std::string& path, nlohmann::json* extras = nullptr);

}  // namespace tlc::cvmodels
