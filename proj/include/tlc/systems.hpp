// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tlc/common.hpp"

namespace tlc::systems {

enum class SystemKind { DoubleWell1d, MullerBrown2d, Butane4 };

enum class BasinLabel { A, B };

struct DoubleWellParams {
  double a = 5.0;     // well depth scale, U = a (x^2 - 1)^2 + tilt * x
  double tilt = 0.0;
};

struct MullerBrownParams {
  std::array<double, 4> amp{-200.0, -100.0, -170.0, 15.0};
  std::array<double, 4> a{-1.0, -1.0, -6.5, 0.7};
  std::array<double, 4> b{0.0, 0.0, 11.0, 0.6};
  std::array<double, 4> c{-10.0, -10.0, -6.5, 0.7};
  std::array<double, 4> x0{1.0, 0.0, -0.5, -1.0};
  std::array<double, 4> y0{0.0, 0.5, 1.5, 1.0};
};

struct Butane4Params {
  double bond_k = 200.0;
  double bond_r0 = 1.0;
  double angle_k = 50.0;
  double angle_theta0 = 1.911;
  double torsion_c = 3.0;  // U(phi) = c (1 + cos 3 phi); trans<->gauche barrier 2c
};

// Analytic toy molecular system: potential, exact forces, a known slow
// coordinate and a two-basin split on it.
struct SystemSpec {
  SystemKind kind = SystemKind::DoubleWell1d;
  std::variant<DoubleWellParams, MullerBrownParams, Butane4Params> params;
  int particle_count = 1;
  int spatial_dim = 1;
  std::vector<double> masses{1.0};
  double basin_threshold = 0.0;

  int dim() const { return particle_count * spatial_dim; }

  static SystemSpec double_well_1d(double a = 5.0, double tilt = 0.0);
  static SystemSpec muller_brown_2d();
  static SystemSpec butane4();

  // Flat view of the per-kind constants, for config round-trips and manifests.
  std::map<std::string, double> parameter_map() const;
};

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

double potential_energy(const SystemSpec& sys, const Configuration& x);

// -grad U, closed form per term.
Configuration force(const SystemSpec& sys, const Configuration& x);
void force_into(const SystemSpec& sys, const Configuration& x, Configuration& f);

// The known slow coordinate: x for the double well, the saddle-line projection
// for Muller-Brown, the 1-2-3-4 torsion in (-pi, pi] for butane4.
double ground_truth_cv(const SystemSpec& sys, const Configuration& x);

// The scalar compared against basin_threshold: identity except butane4, where
// the two gauche wells fold onto |phi|.
double basin_coordinate(const SystemSpec& sys, const Configuration& x);
Configuration basin_coordinate_gradient(const SystemSpec& sys, const Configuration& x);

BasinLabel basin_of(const SystemSpec& sys, const Configuration& x);

// Minimum-energy configuration of a basin; basin A doubles as the alignment
// reference.
Configuration basin_minimum(const SystemSpec& sys, BasinLabel basin);
Configuration reference_configuration(const SystemSpec& sys);

// Canonical butane4 chain at equilibrium bonds/angles with the given torsion.
Configuration butane4_chain(const Butane4Params& p, double torsion);

}  // namespace tlc::systems
