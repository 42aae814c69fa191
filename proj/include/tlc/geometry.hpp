// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "tlc/common.hpp"

namespace tlc::geometry {

// Proper rigid transform found by Kabsch superposition.
// `rotation` is row-major spatial_dim x spatial_dim; aligned = R*x + translation
// per particle. Orthogonal with det +1 to 1e-10.
struct RigidAlignment {
  std::vector<double> rotation;
  std::vector<double> translation;
  double rmsd = 0.0;
  int spatial_dim = 0;
};

struct AlignResult {
  Configuration aligned;
  RigidAlignment transform;
};

// Optimal proper-rotation + translation superposition of x onto ref,
// minimizing the mean squared per-particle residual. spatial_dim = 1 reduces
// to centering; reflections are corrected by flipping the smallest singular
// direction.
AlignResult kabsch_align(const Configuration& x, const Configuration& ref, int spatial_dim);

// Kabsch-minimized root-mean-square particle distance.
double rmsd(const Configuration& x, const Configuration& y, int spatial_dim);

// Signed torsion angle p1-p2-p3-p4 in (-pi, pi]; planar anti -> pi, syn -> 0.
// Throws DegenerateError when a consecutive triple is collinear.
double dihedral(const double* p1, const double* p2, const double* p3, const double* p4);

// d(dihedral)/d(p1..p4), analytic.
std::array<std::array<double, 3>, 4> dihedral_gradient(const double* p1, const double* p2,
                                                       const double* p3, const double* p4);

// Place a fourth point at given bond length / bond angle / torsion relative to
// the chain a-b-c (natural extension reference frame).
std::array<double, 3> place_dihedral(const double* a, const double* b, const double* c,
                                     double bond, double angle, double torsion);

}  // namespace tlc::geometry
