// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlc/common.hpp"
#include "tlc/rng.hpp"

#include "json.hpp"

namespace tlc::nn {

enum class Activation { Tanh, Gelu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected stack; hidden layers use `activation`, the final layer is
// always linear. Weights are row-major (out x in), all arithmetic in f64.
struct DenseNet {
  std::vector<int> layer_sizes;
  Activation activation = Activation::Tanh;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int n_layers() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
};

// Xavier-uniform weights, zero biases, deterministic per seed.
DenseNet init(const std::vector<int>& layer_sizes, Activation activation, std::uint64_t seed);

std::vector<double> forward(const DenseNet& net, const std::vector<double>& x);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const DenseNet& net);
  void reset();
  void scale(double s);
  void axpy(double a, const Gradients& other);  // this += a * other
};

// Reusable forward/backward scratch; keeps per-layer activations so training
// loops avoid reallocating.
struct Workspace {
  std::vector<std::vector<double>> acts;      // acts[0] = input, acts[L] = output
  std::vector<std::vector<double>> preacts;   // preacts[l] = W_l a_l + b_l
  std::vector<double> delta, delta_next;
};

const std::vector<double>& forward(const DenseNet& net, const std::vector<double>& x,
                                   Workspace& ws);

// Exact reverse-mode gradients of <upstream, forward(net, x)> w.r.t. every
// parameter (accumulated into grads) and, when input_grad != nullptr, x.
void backward(const DenseNet& net, const Workspace& ws, const std::vector<double>& upstream,
              Gradients& grads, std::vector<double>* input_grad, Workspace& scratch);

// Convenience single-shot variant.
struct BackwardResult {
  Gradients param_grads;
  std::vector<double> input_grad;
};
BackwardResult backward(const DenseNet& net, const std::vector<double>& x,
                        const std::vector<double>& upstream);

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const DenseNet& net, double lr);
};

// Standard bias-corrected Adam step; deterministic.
void adam_update(DenseNet& net, const Gradients& grads, AdamState& state);

// Checkpoint document: {schema_version, layer_sizes, activation, weights,
// biases, extras}; doubles survive the JSON round-trip bit-exactly.
nlohmann::json to_checkpoint(const DenseNet& net, nlohmann::json extras = {});
DenseNet from_checkpoint(const nlohmann::json& doc, nlohmann::json* extras = nullptr);
void save_checkpoint(const std::string& path, const DenseNet& net, nlohmann::json extras = {});
DenseNet load_checkpoint(const std::string& path, nlohmann::json* extras = nullptr);

}  // namespace tlc::nn
