// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tlc/common.hpp"

namespace tlc::stats {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population variance.
inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

struct PearsonResult {
  double value = 0.0;
  bool degenerate = false;  // zero variance on either side
  std::vector<double> grad_a, grad_b;
};

// Batch Pearson correlation with exact gradients w.r.t. both inputs.
// Degenerate batches report value 0 and zero gradients.
inline PearsonResult pearson_with_grad(const std::vector<double>& a, const std::vector<double>& b,
                                       bool want_grad) {
  require(a.size() == b.size() && a.size() >= 2, "pearson: need matched batches of size >= 2");
  const std::size_t n = a.size();
  const double ma = mean(a), mb = mean(b);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  cov /= static_cast<double>(n);
  va /= static_cast<double>(n);
  vb /= static_cast<double>(n);

  PearsonResult r;
  if (va <= 1e-300 || vb <= 1e-300) {
    r.degenerate = true;
    if (want_grad) {
      r.grad_a.assign(n, 0.0);
      r.grad_b.assign(n, 0.0);
    }
    return r;
  }
  const double sa = std::sqrt(va), sb = std::sqrt(vb);
  r.value = cov / (sa * sb);
  if (want_grad) {
    r.grad_a.resize(n);
    r.grad_b.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double da = a[i] - ma, db = b[i] - mb;
      r.grad_a[i] = inv_n * (db / (sa * sb) - r.value * da / va);
      r.grad_b[i] = inv_n * (da / (sa * sb) - r.value * db / vb);
    }
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson_with_grad(a, b, false).value;
}

// Ranks with ties averaged.
inline std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

}  // namespace tlc::stats
