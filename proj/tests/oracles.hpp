// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent test oracles: finite differences, random rigid transforms,
// quadrature. These deliberately avoid the library's own gradient and
// alignment code paths.

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "tlc/rng.hpp"

namespace oracles {

// Central finite difference of a scalar function.
inline double central_fd(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Central FD gradient w.r.t. a vector argument.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double got, double want, double floor = 1e-8) {
  return std::abs(got - want) / (std::abs(want) + floor);
}

// Largest relative mismatch between two gradient vectors.
inline double max_rel_err(const std::vector<double>& got, const std::vector<double>& want,
                          double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, rel_err(got[i], want[i], floor));
  return worst;
}

// Mismatch relative to the vector scale; the per-component form punishes FD
// roundoff on near-zero entries of an otherwise O(1) vector.
inline double vector_rel_err(const std::vector<double>& got, const std::vector<double>& want,
                             double floor = 1e-8) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - want[i]));
    scale = std::max(scale, std::abs(want[i]));
  }
  return diff / scale;
}

// Rodrigues rotation matrix about a random axis; independent of the library's
// alignment code.
inline std::array<double, 9> random_rotation3(tlc::Rng& rng) {
  double ax = rng.gaussian(), ay = rng.gaussian(), az = rng.gaussian();
  const double n = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= n;
  ay /= n;
  az /= n;
  const double th = rng.uniform() * 2.0 * 3.14159265358979323846;
  const double c = std::cos(th), s = std::sin(th), u = 1.0 - c;
  return {c + ax * ax * u,      ax * ay * u - az * s, ax * az * u + ay * s,
          ay * ax * u + az * s, c + ay * ay * u,      ay * az * u - ax * s,
          az * ax * u - ay * s, az * ay * u + ax * s, c + az * az * u};
}

// Apply rotation + translation to a flat 3D configuration.
inline std::vector<double> rigid_transform3(const std::vector<double>& x,
                                            const std::array<double, 9>& r,
                                            const std::array<double, 3>& t) {
  std::vector<double> y(x.size());
  for (std::size_t p = 0; p < x.size() / 3; ++p) {
    for (int a = 0; a < 3; ++a) {
      double acc = t[static_cast<std::size_t>(a)];
      for (int b = 0; b < 3; ++b)
        acc += r[static_cast<std::size_t>(a) * 3 + static_cast<std::size_t>(b)] * x[p * 3 + b];
      y[p * 3 + static_cast<std::size_t>(a)] = acc;
    }
  }
  return y;
}

// Composite-trapezoid quadrature.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, int n) {
  double acc = 0.5 * (f(lo) + f(hi));
  const double h = (hi - lo) / n;
  for (int i = 1; i < n; ++i) acc += f(lo + i * h);
  return acc * h;
}

// Boltzmann basin-mass ratio log for a 1D potential: the delta-F reference.
inline double delta_f_quadrature(const std::function<double(double)>& potential, double beta,
                                 double lo, double hi, double split, int n = 2000000) {
  const auto wa = trapezoid([&](double x) { return x >= split ? std::exp(-beta * potential(x)) : 0.0; },
                            lo, hi, n);
  const auto wb = trapezoid([&](double x) { return x < split ? std::exp(-beta * potential(x)) : 0.0; },
                            lo, hi, n);
  return std::log(wa / wb) / beta;
}

}  // namespace oracles
