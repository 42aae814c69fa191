// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/nn.hpp"

#include <cmath>

#include "tlc/io.hpp"

namespace tlc::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kTwoOverSqrtPi = 1.12837916709551257390;

inline double act_value(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Gelu: return 0.5 * z * (1.0 + std::erf(z * kInvSqrt2));
    case Activation::Identity: return z;
  }
  return z;
}

inline double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(z * kInvSqrt2));
      const double pdf = 0.5 * kTwoOverSqrtPi * kInvSqrt2 * std::exp(-0.5 * z * z);
      return cdf + z * pdf;
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

void check_shapes(const DenseNet& net) {
  require(net.layer_sizes.size() >= 2, "DenseNet: need at least input and output layers");
  require(net.weights.size() + 1 == net.layer_sizes.size(), "DenseNet: weight count mismatch");
  require(net.biases.size() == net.weights.size(), "DenseNet: bias count mismatch");
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const std::size_t rows = static_cast<std::size_t>(net.layer_sizes[l + 1]);
    const std::size_t cols = static_cast<std::size_t>(net.layer_sizes[l]);
    require(net.weights[l].size() == rows * cols, "DenseNet: weight shape mismatch");
    require(net.biases[l].size() == rows, "DenseNet: bias shape mismatch");
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Gelu: return "gelu";
    case Activation::Identity: return "identity";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "gelu") return Activation::Gelu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + s);
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

DenseNet init(const std::vector<int>& layer_sizes, Activation activation, std::uint64_t seed) {
  require(layer_sizes.size() >= 2, "init: need at least 2 layers");
  for (int s : layer_sizes) require(s >= 1, "init: layer sizes must be >= 1");
  DenseNet net;
  net.layer_sizes = layer_sizes;
  net.activation = activation;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w) v = (2.0 * rng.uniform() - 1.0) * limit;
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
  }
  return net;
}

const std::vector<double>& forward(const DenseNet& net, const std::vector<double>& x,
                                   Workspace& ws) {
  check_shapes(net);
  require(static_cast<int>(x.size()) == net.input_dim(), "forward: input size mismatch");
  const int L = net.n_layers();
  ws.acts.resize(static_cast<std::size_t>(L) + 1);
  ws.preacts.resize(static_cast<std::size_t>(L));
  ws.acts[0] = x;
  for (int l = 0; l < L; ++l) {
    const int rows = net.layer_sizes[l + 1];
    const int cols = net.layer_sizes[l];
    const std::vector<double>& in = ws.acts[l];
    std::vector<double>& z = ws.preacts[l];
    z.assign(static_cast<std::size_t>(rows), 0.0);
    const double* w = net.weights[l].data();
    for (int r = 0; r < rows; ++r) {
      double acc = net.biases[l][r];
      const double* wrow = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += wrow[c] * in[c];
      z[r] = acc;
    }
    std::vector<double>& out = ws.acts[l + 1];
    out.resize(static_cast<std::size_t>(rows));
    const bool last = (l == L - 1);
    for (int r = 0; r < rows; ++r)
      out[r] = last ? z[r] : act_value(net.activation, z[r]);
  }
  return ws.acts[static_cast<std::size_t>(L)];
}

std::vector<double> forward(const DenseNet& net, const std::vector<double>& x) {
  Workspace ws;
  return forward(net, x, ws);
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  g.weights.reserve(net.weights.size());
  g.biases.reserve(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

void Gradients::reset() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void Gradients::scale(double s) {
  for (auto& w : weights)
    for (double& v : w) v *= s;
  for (auto& b : biases)
    for (double& v : b) v *= s;
}

void Gradients::axpy(double a, const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += a * other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += a * other.biases[l][i];
  }
}

void backward(const DenseNet& net, const Workspace& ws, const std::vector<double>& upstream,
              Gradients& grads, std::vector<double>* input_grad, Workspace& scratch) {
  const int L = net.n_layers();
  require(static_cast<int>(upstream.size()) == net.output_dim(),
          "backward: upstream size mismatch");
  require(ws.acts.size() == static_cast<std::size_t>(L) + 1, "backward: run forward first");

  std::vector<double>& delta = scratch.delta;
  std::vector<double>& delta_next = scratch.delta_next;
  delta = upstream;  // final layer is linear: d(out)/d(z_L) = 1

  for (int l = L - 1; l >= 0; --l) {
    const int rows = net.layer_sizes[l + 1];
    const int cols = net.layer_sizes[l];
    const std::vector<double>& in = ws.acts[l];
    const double* w = net.weights[l].data();

    double* gw = grads.weights[l].data();
    for (int r = 0; r < rows; ++r) {
      const double d = delta[r];
      grads.biases[l][r] += d;
      double* gwrow = gw + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) gwrow[c] += d * in[c];
    }

    const bool need_input = (l > 0) || (input_grad != nullptr);
    if (!need_input) break;
    delta_next.assign(static_cast<std::size_t>(cols), 0.0);
    for (int r = 0; r < rows; ++r) {
      const double d = delta[r];
      const double* wrow = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) delta_next[c] += d * wrow[c];
    }
    if (l > 0) {
      // multiply by activation derivative of the previous layer's preacts
      const std::vector<double>& z = ws.preacts[l - 1];
      for (int c = 0; c < cols; ++c) delta_next[c] *= act_deriv(net.activation, z[c]);
    }
    std::swap(delta, delta_next);
  }
  if (input_grad != nullptr) *input_grad = delta;
}

BackwardResult backward(const DenseNet& net, const std::vector<double>& x,
                        const std::vector<double>& upstream) {
  Workspace ws, scratch;
  forward(net, x, ws);
  BackwardResult r;
  r.param_grads = Gradients::zeros_like(net);
  backward(net, ws, upstream, r.param_grads, &r.input_grad, scratch);
  return r;
}

AdamState AdamState::for_net(const DenseNet& net, double lr_) {
  AdamState s;
  s.lr = lr_;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    s.m_w.emplace_back(net.weights[l].size(), 0.0);
    s.v_w.emplace_back(net.weights[l].size(), 0.0);
    s.m_b.emplace_back(net.biases[l].size(), 0.0);
    s.v_b.emplace_back(net.biases[l].size(), 0.0);
  }
  return s;
}

void adam_update(DenseNet& net, const Gradients& grads, AdamState& st) {
  require(st.m_w.size() == net.weights.size(), "adam_update: state/net mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto update = [&](std::vector<double>& theta, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      theta[i] -= st.lr * mh / (std::sqrt(vh) + st.eps);
    }
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    update(net.weights[l], grads.weights[l], st.m_w[l], st.v_w[l]);
    update(net.biases[l], grads.biases[l], st.m_b[l], st.v_b[l]);
  }
}

nlohmann::json to_checkpoint(const DenseNet& net, nlohmann::json extras) {
  check_shapes(net);
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["layer_sizes"] = net.layer_sizes;
  doc["activation"] = to_string(net.activation);
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const int rows = net.layer_sizes[l + 1];
    const int cols = net.layer_sizes[l];
    nlohmann::json wm = nlohmann::json::array();
    for (int r = 0; r < rows; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < cols; ++c)
        row.push_back(net.weights[l][static_cast<std::size_t>(r) * cols + c]);
      wm.push_back(std::move(row));
    }
    weights.push_back(std::move(wm));
    biases.push_back(net.biases[l]);
  }
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);
  doc["extras"] = std::move(extras);
  return doc;
}

DenseNet from_checkpoint(const nlohmann::json& doc, nlohmann::json* extras) {
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1)
    throw ConfigError("checkpoint: unsupported schema_version");
  DenseNet net;
  net.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
  net.activation = activation_from_string(doc.at("activation").get<std::string>());
  const auto& weights = doc.at("weights");
  const auto& biases = doc.at("biases");
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    const int rows = net.layer_sizes[l + 1];
    const int cols = net.layer_sizes[l];
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(rows) * cols);
    for (const auto& row : weights.at(l))
      for (const auto& v : row) w.push_back(v.get<double>());
    if (w.size() != static_cast<std::size_t>(rows) * cols)
      throw ConfigError("checkpoint: weight shape mismatch");
    net.weights.push_back(std::move(w));
    net.biases.push_back(biases.at(l).get<std::vector<double>>());
  }
  check_shapes(net);
  if (extras != nullptr) *extras = doc.contains("extras") ? doc["extras"] : nlohmann::json();
  return net;
}

void save_checkpoint(const std::string& path, const DenseNet& net, nlohmann::json extras) {
  io::atomic_write(path, to_checkpoint(net, std::move(extras)).dump(1));
}

DenseNet load_checkpoint(const std::string& path, nlohmann::json* extras) {
  return from_checkpoint(nlohmann::json::parse(io::read_bytes(path)), extras);
}

}  // namespace tlc::nn
