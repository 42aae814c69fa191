// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/cvmodels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "tlc/geometry.hpp"
#include "tlc/io.hpp"
#include "tlc/stats.hpp"

namespace tlc::cvmodels {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<double>> featurize_all(const Featurizer& feat,
                                               const std::vector<Configuration>& configs) {
  std::vector<std::vector<double>> out;
  out.reserve(configs.size());
  for (const auto& c : configs) out.push_back(feat.features(c));
  return out;
}

struct Standardizer {
  std::vector<double> mean, std;
  std::vector<bool> live;  // false for (near-)constant features

  static Standardizer fit(const std::vector<const std::vector<std::vector<double>>*>& sets) {
    Standardizer s;
    std::size_t f = 0, n = 0;
    for (const auto* set : sets) {
      if (!set->empty()) f = set->front().size();
      n += set->size();
    }
    require(n >= 2, "standardizer: need at least 2 samples");
    s.mean.assign(f, 0.0);
    s.std.assign(f, 0.0);
    for (const auto* set : sets)
      for (const auto& row : *set)
        for (std::size_t j = 0; j < f; ++j) s.mean[j] += row[j];
    for (std::size_t j = 0; j < f; ++j) s.mean[j] /= static_cast<double>(n);
    for (const auto* set : sets)
      for (const auto& row : *set)
        for (std::size_t j = 0; j < f; ++j) {
          const double d = row[j] - s.mean[j];
          s.std[j] += d * d;
        }
    s.live.assign(f, true);
    for (std::size_t j = 0; j < f; ++j) {
      s.std[j] = std::sqrt(s.std[j] / static_cast<double>(n));
      if (s.std[j] < 1e-12 * std::max(1.0, std::abs(s.mean[j]))) {
        s.live[j] = false;
        s.std[j] = 1.0;
      }
    }
    return s;
  }

  Eigen::MatrixXd apply(const std::vector<std::vector<double>>& rows) const {
    Eigen::MatrixXd z(rows.size(), mean.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < mean.size(); ++j)
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            live[j] ? (rows[i][j] - mean[j]) / std[j] : 0.0;
    return z;
  }
};

void check_pd(const Eigen::MatrixXd& b, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lo > 1e-12 * std::max(hi, 1.0)))
    throw DegenerateError(std::string(who) +
                          ": ill-conditioned covariance; add regularization");
}

// Shared trainer plumbing: per-sample backprop accumulated over a batch.
struct NetTrainer {
  nn::DenseNet net;
  nn::AdamState adam;
  nn::Gradients grads;
  nn::Workspace ws, scratch;

  explicit NetTrainer(nn::DenseNet n, double lr)
      : net(std::move(n)), adam(nn::AdamState::for_net(net, lr)),
        grads(nn::Gradients::zeros_like(net)) {}

  const std::vector<double>& forward(const std::vector<double>& x) {
    return nn::forward(net, x, ws);
  }
  void backward(const std::vector<double>& upstream, std::vector<double>* input_grad) {
    nn::backward(net, ws, upstream, grads, input_grad, scratch);
  }
  void apply() {
    nn::adam_update(net, grads, adam);
    grads.reset();
  }
};

std::vector<std::size_t> sample_batch(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
  for (auto& i : idx) i = std::min(static_cast<std::size_t>(rng.uniform() * n), n - 1);
  return idx;
}

}  // namespace

std::string to_string(InputMode m) {
  return m == InputMode::AlignedCoords ? "aligned_coords" : "pairwise_distances";
}

InputMode input_mode_from_string(const std::string& s) {
  if (s == "aligned_coords") return InputMode::AlignedCoords;
  if (s == "pairwise_distances") return InputMode::PairwiseDistances;
  throw ConfigError("unknown input_mode: " + s);
}

int Featurizer::feature_dim() const {
  if (mode == InputMode::AlignedCoords) return n_particles * spatial_dim;
  return n_particles * (n_particles - 1) / 2;
}

std::vector<double> Featurizer::features(const Configuration& x) const {
  require(static_cast<int>(x.size()) == n_particles * spatial_dim,
          "featurize: dimension mismatch");
  if (mode == InputMode::AlignedCoords) {
    if (n_particles == 1) return x;
    return geometry::kabsch_align(x, reference, spatial_dim).aligned;
  }
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(feature_dim()));
  for (int i = 0; i < n_particles; ++i) {
    for (int j = i + 1; j < n_particles; ++j) {
      double acc = 0.0;
      for (int k = 0; k < spatial_dim; ++k) {
        const double diff = x[static_cast<std::size_t>(i) * spatial_dim + k] -
                            x[static_cast<std::size_t>(j) * spatial_dim + k];
        acc += diff * diff;
      }
      d.push_back(std::sqrt(acc));
    }
  }
  return d;
}

Configuration Featurizer::pullback_gradient(const Configuration& x,
                                            const std::vector<double>& g_feat) const {
  require(static_cast<int>(g_feat.size()) == feature_dim(),
          "pullback_gradient: feature gradient size mismatch");
  const int sd = spatial_dim;
  if (mode == InputMode::AlignedCoords) {
    if (n_particles == 1) return g_feat;
    const auto res = geometry::kabsch_align(x, reference, sd);
    const auto& rot = res.transform.rotation;
    std::vector<double> gbar(static_cast<std::size_t>(sd), 0.0);
    for (int p = 0; p < n_particles; ++p)
      for (int a = 0; a < sd; ++a) gbar[a] += g_feat[static_cast<std::size_t>(p) * sd + a];
    for (double& v : gbar) v /= n_particles;
    Configuration g(x.size(), 0.0);
    for (int p = 0; p < n_particles; ++p) {
      for (int b = 0; b < sd; ++b) {
        double acc = 0.0;
        for (int a = 0; a < sd; ++a)
          acc += rot[static_cast<std::size_t>(a) * sd + b] *
                 (g_feat[static_cast<std::size_t>(p) * sd + a] - gbar[a]);
        g[static_cast<std::size_t>(p) * sd + b] = acc;
      }
    }
    return g;
  }
  Configuration g(x.size(), 0.0);
  int idx = 0;
  for (int i = 0; i < n_particles; ++i) {
    for (int j = i + 1; j < n_particles; ++j, ++idx) {
      double diff[3] = {0, 0, 0};
      double r2 = 0.0;
      for (int k = 0; k < sd; ++k) {
        diff[k] = x[static_cast<std::size_t>(i) * sd + k] -
                  x[static_cast<std::size_t>(j) * sd + k];
        r2 += diff[k] * diff[k];
      }
      const double r = std::sqrt(r2);
      if (r <= 0.0) throw DegenerateError("pullback_gradient: coincident particles");
      for (int k = 0; k < sd; ++k) {
        const double u = g_feat[idx] * diff[k] / r;
        g[static_cast<std::size_t>(i) * sd + k] += u;
        g[static_cast<std::size_t>(j) * sd + k] -= u;
      }
    }
  }
  return g;
}

Featurizer Featurizer::for_system(const systems::SystemSpec& sys, InputMode mode) {
  Featurizer f;
  f.mode = mode;
  f.reference = systems::reference_configuration(sys);
  f.n_particles = sys.particle_count;
  f.spatial_dim = sys.spatial_dim;
  return f;
}

std::vector<double> featurize(const CvEncoder& enc, const Configuration& x) {
  return enc.featurizer.features(x);
}

double raw_cv(const CvEncoder& enc, const Configuration& x) {
  require(enc.net.output_dim() == 1, "raw_cv: encoder must be scalar");
  return nn::forward(enc.net, featurize(enc, x))[0];
}

double encode(const CvEncoder& enc, const Configuration& x) {
  require(enc.calibration.raw_min < enc.calibration.raw_max,
          "encode: invalid calibration (raw_min >= raw_max)");
  return enc.calibration.apply(raw_cv(enc, x));
}

std::vector<double> feature_gradient(const CvEncoder& enc, const Configuration& x) {
  require(enc.net.output_dim() == 1, "feature_gradient: encoder must be scalar");
  const auto f = featurize(enc, x);
  auto back = nn::backward(enc.net, f, {1.0});
  const double scale = enc.calibration.scale();
  for (double& v : back.input_grad) v *= scale;
  return back.input_grad;
}

Configuration cv_input_gradient(const CvEncoder& enc, const Configuration& x) {
  return enc.featurizer.pullback_gradient(x, feature_gradient(enc, x));
}

Calibration calibrate(CvEncoder& enc, const std::vector<Configuration>& dataset,
                      const std::vector<Configuration>& basin_a_samples) {
  require(!dataset.empty(), "calibrate: empty dataset");
  require(!basin_a_samples.empty(), "calibrate: empty basin-A sample set");
  const Calibration saved = enc.calibration;
  enc.calibration = Calibration::identity();
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& c : dataset) {
    const double r = raw_cv(enc, c);
    if (first) {
      lo = hi = r;
      first = false;
    } else {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  if (!(hi > lo)) {
    enc.calibration = saved;
    throw DegenerateError("calibrate: encoder is constant on the dataset");
  }
  double mean_a = 0.0;
  for (const auto& c : basin_a_samples) mean_a += raw_cv(enc, c);
  mean_a /= static_cast<double>(basin_a_samples.size());
  Calibration cal;
  cal.raw_min = lo;
  cal.raw_max = hi;
  cal.sign = (2.0 * (mean_a - lo) / (hi - lo) - 1.0) >= 0.0 ? 1.0 : -1.0;
  enc.calibration = cal;
  return cal;
}

std::vector<SensitivityEntry> sensitivity(const CvEncoder& enc,
                                          const std::vector<Configuration>& dataset) {
  require(!dataset.empty(), "sensitivity: empty dataset");
  std::vector<double> acc(static_cast<std::size_t>(enc.featurizer.feature_dim()), 0.0);
  for (const auto& c : dataset) {
    const auto g = feature_gradient(enc, c);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += std::abs(g[j]);
  }
  std::vector<SensitivityEntry> out;
  out.reserve(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j)
    out.push_back({static_cast<int>(j), acc[j] / static_cast<double>(dataset.size())});
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.value > b.value; });
  return out;
}

TaeResult train_tae(const dynamics::PairDataset& pairs, const Featurizer& feat,
                    const TaeConfig& cfg) {
  require(!pairs.x_t.empty(), "train_tae: empty pair dataset");
  const auto ft = featurize_all(feat, pairs.x_t);
  const auto ftau = featurize_all(feat, pairs.x_tau);
  const int f = feat.feature_dim();

  std::vector<int> enc_sizes{f};
  for (int h : cfg.hidden) enc_sizes.push_back(h);
  enc_sizes.push_back(1);
  std::vector<int> dec_sizes{1};
  for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) dec_sizes.push_back(*it);
  dec_sizes.push_back(f);

  NetTrainer enc(nn::init(enc_sizes, cfg.activation, mix_seed(cfg.seed, 1)), cfg.lr);
  NetTrainer dec(nn::init(dec_sizes, cfg.activation, mix_seed(cfg.seed, 2)), cfg.lr);
  Rng batch_rng(mix_seed(cfg.seed, 3));

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.n_iters));
  std::vector<double> residual(static_cast<std::size_t>(f));
  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    const auto idx = sample_batch(ft.size(), cfg.batch_size, batch_rng);
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    double loss = 0.0;
    for (std::size_t i : idx) {
      const auto& z = enc.forward(ft[i]);
      const double code = z[0];
      const auto& y = dec.forward({code});
      for (int j = 0; j < f; ++j) {
        residual[j] = y[j] - ftau[i][j];
        loss += residual[j] * residual[j];
      }
      std::vector<double> up(static_cast<std::size_t>(f));
      for (int j = 0; j < f; ++j) up[j] = 2.0 * residual[j] * inv_b;
      std::vector<double> g_code;
      dec.backward(up, &g_code);
      enc.backward({g_code[0]}, nullptr);
    }
    loss *= inv_b;
    if (!std::isfinite(loss))
      throw NumericsError("train_tae: diverged at iteration " + std::to_string(iter));
    enc.apply();
    dec.apply();
    history.push_back(loss);
  }

  TaeResult out{CvEncoder{std::move(enc.net), feat, Calibration::identity()},
                std::move(dec.net), std::move(history)};
  return out;
}

double gaussian_kl(double mu, double logvar) {
  return 0.5 * (mu * mu + std::exp(logvar) - 1.0 - logvar);
}

VdeResult train_vde(const dynamics::PairDataset& pairs, const Featurizer& feat,
                    const VdeConfig& cfg) {
  require(!pairs.x_t.empty(), "train_vde: empty pair dataset");
  const auto ft = featurize_all(feat, pairs.x_t);
  const auto ftau = featurize_all(feat, pairs.x_tau);
  const int f = feat.feature_dim();

  std::vector<int> enc_sizes{f};
  for (int h : cfg.hidden) enc_sizes.push_back(h);
  enc_sizes.push_back(2);  // (mean, logvar)
  std::vector<int> dec_sizes{1};
  for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) dec_sizes.push_back(*it);
  dec_sizes.push_back(f);

  NetTrainer enc(nn::init(enc_sizes, cfg.activation, mix_seed(cfg.seed, 1)), cfg.lr);
  NetTrainer dec(nn::init(dec_sizes, cfg.activation, mix_seed(cfg.seed, 2)), cfg.lr);
  Rng batch_rng(mix_seed(cfg.seed, 3));
  Rng noise_rng(mix_seed(cfg.seed, 4));

  const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
  std::vector<double> mu_t(b), lv_t(b), mu_tau(b), eps(b), codes(b);
  std::vector<double> history;
  nn::Workspace enc_ws_tau, scratch_tau;

  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    const auto idx = sample_batch(ft.size(), cfg.batch_size, batch_rng);
    const double inv_b = 1.0 / static_cast<double>(idx.size());

    // first pass: latents on both sides
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& zt = nn::forward(enc.net, ft[idx[k]], enc.ws);
      mu_t[k] = zt[0];
      lv_t[k] = zt[1];
      eps[k] = cfg.noise_scale != 0.0 ? noise_rng.gaussian() : 0.0;
      codes[k] = mu_t[k] + cfg.noise_scale * std::exp(0.5 * lv_t[k]) * eps[k];
      mu_tau[k] = nn::forward(enc.net, ftau[idx[k]], enc_ws_tau)[0];
    }
    auto rho = stats::pearson_with_grad(mu_t, mu_tau, true);

    double recon = 0.0, kl = 0.0;
    std::vector<double> up(static_cast<std::size_t>(f));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      // recompute the traces consumed by backward (cheaper than storing all)
      nn::forward(enc.net, ft[idx[k]], enc.ws);
      const auto& y = dec.forward({codes[k]});
      double g_code = 0.0;
      for (int j = 0; j < f; ++j) {
        const double r = y[j] - ftau[idx[k]][j];
        recon += r * r;
        up[j] = 2.0 * r * inv_b;
      }
      std::vector<double> gin;
      dec.backward(up, &gin);
      g_code = gin[0];
      kl += gaussian_kl(mu_t[k], lv_t[k]);

      const double dmu = g_code + cfg.beta_kl * mu_t[k] * inv_b -
                         cfg.lambda_ac * rho.grad_a[k];
      const double dlv = g_code * 0.5 * cfg.noise_scale * std::exp(0.5 * lv_t[k]) * eps[k] +
                         cfg.beta_kl * 0.5 * (std::exp(lv_t[k]) - 1.0) * inv_b;
      enc.backward({dmu, dlv}, nullptr);

      nn::forward(enc.net, ftau[idx[k]], enc.ws);
      enc.backward({-cfg.lambda_ac * rho.grad_b[k], 0.0}, nullptr);
    }
    const double loss = recon * inv_b + cfg.beta_kl * kl * inv_b - cfg.lambda_ac * rho.value;
    if (!std::isfinite(loss))
      throw NumericsError("train_vde: diverged at iteration " + std::to_string(iter));
    enc.apply();
    dec.apply();
    history.push_back(loss);
  }

  // Mean head: keep only the mu row of the final layer.
  nn::DenseNet head = enc.net;
  const int last_in = head.layer_sizes[head.layer_sizes.size() - 2];
  std::vector<double> w_row(head.weights.back().begin(),
                            head.weights.back().begin() + last_in);
  head.weights.back() = std::move(w_row);
  head.biases.back() = {head.biases.back()[0]};
  head.layer_sizes.back() = 1;

  return VdeResult{CvEncoder{std::move(head), feat, Calibration::identity()},
                   std::move(dec.net), std::move(history)};
}

DeepTdaResult train_deeptda(const std::vector<Configuration>& configs,
                            const std::vector<systems::BasinLabel>& labels,
                            const Featurizer& feat, const DeepTdaConfig& cfg) {
  require(configs.size() == labels.size() && !configs.empty(),
          "train_deeptda: configs/labels mismatch");
  bool has_a = false, has_b = false;
  for (auto l : labels) (l == systems::BasinLabel::A ? has_a : has_b) = true;
  require(has_a && has_b, "train_deeptda: both basin labels required");

  const auto feats = featurize_all(feat, configs);
  const int f = feat.feature_dim();
  std::vector<int> sizes{f};
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(1);

  NetTrainer net(nn::init(sizes, cfg.activation, mix_seed(cfg.seed, 1)), cfg.lr);
  Rng batch_rng(mix_seed(cfg.seed, 2));

  std::vector<double> history;
  int skipped = 0;
  std::vector<double> outs;
  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    const auto idx = sample_batch(feats.size(), cfg.batch_size, batch_rng);
    outs.resize(idx.size());
    double sum[2] = {0, 0};
    int cnt[2] = {0, 0};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      outs[k] = nn::forward(net.net, feats[idx[k]])[0];
      const int s = labels[idx[k]] == systems::BasinLabel::A ? 0 : 1;
      sum[s] += outs[k];
      cnt[s] += 1;
    }
    if (cnt[0] < 2 || cnt[1] < 2) {
      ++skipped;  // per-state statistics undefined
      continue;
    }
    const double mu[2] = {sum[0] / cnt[0], sum[1] / cnt[1]};
    double var[2] = {0, 0};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int s = labels[idx[k]] == systems::BasinLabel::A ? 0 : 1;
      var[s] += (outs[k] - mu[s]) * (outs[k] - mu[s]);
    }
    double sigma[2];
    for (int s = 0; s < 2; ++s) sigma[s] = std::sqrt(var[s] / cnt[s] + 1e-12);
    const double mu_t[2] = {cfg.mu_target_a, cfg.mu_target_b};

    double loss = 0.0;
    for (int s = 0; s < 2; ++s)
      loss += cfg.alpha * (mu[s] - mu_t[s]) * (mu[s] - mu_t[s]) +
              cfg.beta * (sigma[s] - cfg.sigma_target) * (sigma[s] - cfg.sigma_target);
    if (!std::isfinite(loss))
      throw NumericsError("train_deeptda: diverged at iteration " + std::to_string(iter));

    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int s = labels[idx[k]] == systems::BasinLabel::A ? 0 : 1;
      const double g = 2.0 * cfg.alpha * (mu[s] - mu_t[s]) / cnt[s] +
                       2.0 * cfg.beta * (sigma[s] - cfg.sigma_target) * (outs[k] - mu[s]) /
                           (cnt[s] * sigma[s]);
      nn::forward(net.net, feats[idx[k]], net.ws);
      net.backward({g}, nullptr);
    }
    net.apply();
    history.push_back(loss);
  }

  return DeepTdaResult{CvEncoder{std::move(net.net), feat, Calibration::identity()},
                       std::move(history), skipped};
}

LinearCv fit_linear_tica_features(const std::vector<std::vector<double>>& f_t,
                                  const std::vector<std::vector<double>>& f_tau, double reg) {
  require(f_t.size() == f_tau.size(), "fit_linear_tica: side size mismatch");
  require(f_t.size() >= 2, "fit_linear_tica: need at least 2 pairs");
  require(reg >= 0.0, "fit_linear_tica: reg must be >= 0");
  const auto sd = Standardizer::fit({&f_t, &f_tau});
  const Eigen::MatrixXd zt = sd.apply(f_t);
  const Eigen::MatrixXd ztau = sd.apply(f_tau);
  const double n2 = 2.0 * static_cast<double>(f_t.size());

  const Eigen::MatrixXd c0 =
      (zt.transpose() * zt + ztau.transpose() * ztau) / n2;
  const Eigen::MatrixXd ct =
      (zt.transpose() * ztau + ztau.transpose() * zt) / n2;  // symmetrized
  const Eigen::MatrixXd b =
      c0 + reg * Eigen::MatrixXd::Identity(c0.rows(), c0.cols());
  check_pd(b, "fit_linear_tica");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(ct, b);
  if (ges.info() != Eigen::Success)
    throw DegenerateError("fit_linear_tica: eigensolver failed");
  const Eigen::Index f = c0.rows();

  Eigen::VectorXd w = ges.eigenvectors().col(f - 1);  // ascending order
  const double var_proj = w.dot(c0 * w);
  if (!(var_proj > 1e-300)) throw DegenerateError("fit_linear_tica: degenerate top direction");
  w /= std::sqrt(var_proj);  // unit variance of the whitened projection
  Eigen::Index imax = 0;
  w.cwiseAbs().maxCoeff(&imax);
  if (w[imax] < 0.0) w = -w;

  LinearCv lin;
  lin.eigenvalues.resize(static_cast<std::size_t>(f));
  for (Eigen::Index i = 0; i < f; ++i)
    lin.eigenvalues[static_cast<std::size_t>(i)] = ges.eigenvalues()[f - 1 - i];
  lin.direction.assign(static_cast<std::size_t>(f), 0.0);
  lin.offset = 0.0;
  for (Eigen::Index j = 0; j < f; ++j) {
    if (!sd.live[static_cast<std::size_t>(j)]) continue;
    lin.direction[static_cast<std::size_t>(j)] = w[j] / sd.std[static_cast<std::size_t>(j)];
    lin.offset -= w[j] * sd.mean[static_cast<std::size_t>(j)] / sd.std[static_cast<std::size_t>(j)];
  }
  return lin;
}

LinearCv fit_linear_tica(const dynamics::PairDataset& pairs, const Featurizer& feat,
                         double reg) {
  return fit_linear_tica_features(featurize_all(feat, pairs.x_t),
                                  featurize_all(feat, pairs.x_tau), reg);
}

LinearCv fit_lda_features(const std::vector<std::vector<double>>& feats,
                          const std::vector<systems::BasinLabel>& labels, double reg) {
  require(feats.size() == labels.size() && feats.size() >= 2, "fit_lda: bad dataset");
  require(reg >= 0.0, "fit_lda: reg must be >= 0");
  const auto sd = Standardizer::fit({&feats});
  const Eigen::MatrixXd z = sd.apply(feats);
  const Eigen::Index f = z.cols();

  Eigen::VectorXd mu[2] = {Eigen::VectorXd::Zero(f), Eigen::VectorXd::Zero(f)};
  int cnt[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i] == systems::BasinLabel::A ? 0 : 1;
    mu[c] += z.row(static_cast<Eigen::Index>(i)).transpose();
    cnt[c] += 1;
  }
  require(cnt[0] > 0 && cnt[1] > 0, "fit_lda: both classes required");
  mu[0] /= cnt[0];
  mu[1] /= cnt[1];

  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(f, f);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i] == systems::BasinLabel::A ? 0 : 1;
    const Eigen::VectorXd d = z.row(static_cast<Eigen::Index>(i)).transpose() - mu[c];
    sw += d * d.transpose();
  }
  sw /= static_cast<double>(feats.size());

  const Eigen::VectorXd diff = mu[0] - mu[1];
  if (diff.norm() < 1e-10)
    throw DegenerateError("fit_lda: class means coincide; direction degenerate");
  const Eigen::MatrixXd b = sw + reg * Eigen::MatrixXd::Identity(f, f);
  check_pd(b, "fit_lda");
  Eigen::VectorXd w = b.ldlt().solve(diff);

  LinearCv lin;
  lin.direction.assign(static_cast<std::size_t>(f), 0.0);
  double off_std = 0.0;  // offset accumulated while unfolding standardization
  for (Eigen::Index j = 0; j < f; ++j) {
    if (!sd.live[static_cast<std::size_t>(j)]) continue;
    lin.direction[static_cast<std::size_t>(j)] = w[j] / sd.std[static_cast<std::size_t>(j)];
    off_std -= w[j] * sd.mean[static_cast<std::size_t>(j)] / sd.std[static_cast<std::size_t>(j)];
  }
  double norm = 0.0;
  for (double v : lin.direction) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 1e-300)) throw DegenerateError("fit_lda: zero direction");
  for (double& v : lin.direction) v /= norm;
  off_std /= norm;

  // center the CV on the midpoint of the class means; w = B^-1 diff with B
  // positive definite already puts class A on the positive side
  const double mid = 0.5 * (w.dot(mu[0]) + w.dot(mu[1])) / norm;
  lin.offset = off_std - mid;
  return lin;
}

LinearCv fit_lda(const std::vector<Configuration>& configs,
                 const std::vector<systems::BasinLabel>& labels, const Featurizer& feat,
                 double reg) {
  return fit_lda_features(featurize_all(feat, configs), labels, reg);
}

CvEncoder linear_cv_encoder(const LinearCv& lin, const Featurizer& feat) {
  require(static_cast<int>(lin.direction.size()) == feat.feature_dim(),
          "linear_cv_encoder: direction/feature dim mismatch");
  nn::DenseNet net;
  net.layer_sizes = {feat.feature_dim(), 1};
  net.activation = nn::Activation::Identity;
  net.weights = {lin.direction};
  net.biases = {{lin.offset}};
  return CvEncoder{std::move(net), feat, Calibration::identity()};
}

CvFunction cv_function(const CvEncoder& enc) {
  auto p = std::make_shared<CvEncoder>(enc);
  CvFunction fn;
  fn.value = [p](const Configuration& x) { return encode(*p, x); };
  fn.gradient = [p](const Configuration& x) { return cv_input_gradient(*p, x); };
  return fn;
}

CvFunction basin_coordinate_cv(const systems::SystemSpec& sys) {
  auto p = std::make_shared<systems::SystemSpec>(sys);
  CvFunction fn;
  fn.value = [p](const Configuration& x) { return systems::basin_coordinate(*p, x); };
  fn.gradient = [p](const Configuration& x) {
    return systems::basin_coordinate_gradient(*p, x);
  };
  return fn;
}

void save_encoder(const std::string& path, const CvEncoder& enc, nlohmann::json extra_fields) {
  nlohmann::json extras = std::move(extra_fields);
  extras["input_mode"] = to_string(enc.featurizer.mode);
  extras["reference"] = enc.featurizer.reference;
  extras["n_particles"] = enc.featurizer.n_particles;
  extras["spatial_dim"] = enc.featurizer.spatial_dim;
  extras["calibration"] = {{"raw_min", enc.calibration.raw_min},
                           {"raw_max", enc.calibration.raw_max},
                           {"sign", enc.calibration.sign}};
  nn::save_checkpoint(path, enc.net, std::move(extras));
}

CvEncoder load_encoder(const std::string& path, nlohmann::json* extras_out) {
  nlohmann::json extras;
  CvEncoder enc;
  enc.net = nn::load_checkpoint(path, &extras);
  enc.featurizer.mode = input_mode_from_string(extras.at("input_mode").get<std::string>());
  enc.featurizer.reference = extras.at("reference").get<std::vector<double>>();
  enc.featurizer.n_particles = extras.at("n_particles").get<int>();
  enc.featurizer.spatial_dim = extras.at("spatial_dim").get<int>();
  const auto& cal = extras.at("calibration");
  enc.calibration.raw_min = cal.at("raw_min").get<double>();
  enc.calibration.raw_max = cal.at("raw_max").get<double>();
  enc.calibration.sign = cal.at("sign").get<double>();
  if (extras_out != nullptr) *extras_out = std::move(extras);
  return enc;
}

}  // namespace tlc::cvmodels
