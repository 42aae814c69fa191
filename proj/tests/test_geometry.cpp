// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "tlc/geometry.hpp"
#include "tlc/rng.hpp"

using namespace tlc;
using geometry::dihedral;
using geometry::kabsch_align;
using geometry::rmsd;

namespace {
constexpr double kPi = 3.14159265358979323846;

Configuration random_cloud(Rng& rng, int n, int d, double scale = 1.0) {
  Configuration x(static_cast<std::size_t>(n) * d);
  for (auto& v : x) v = scale * rng.gaussian();
  return x;
}

double rotation_orthogonality(const geometry::RigidAlignment& t) {
  const int d = t.spatial_dim;
  double worst = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k)
        acc += t.rotation[static_cast<std::size_t>(k) * d + i] *
               t.rotation[static_cast<std::size_t>(k) * d + j];
      worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double rotation_det(const geometry::RigidAlignment& t) {
  const int d = t.spatial_dim;
  const auto& r = t.rotation;
  if (d == 1) return r[0];
  if (d == 2) return r[0] * r[3] - r[1] * r[2];
  return r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
         r[2] * (r[3] * r[7] - r[4] * r[6]);
}

}  // namespace

TEST_CASE("kabsch self-alignment is the identity") {
  Rng rng(11);
  const auto x = random_cloud(rng, 5, 3);
  const auto res = kabsch_align(x, x, 3);
  CHECK(std::abs(res.transform.rmsd) < 1e-12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(res.transform.rotation[static_cast<std::size_t>(i) * 3 + j] -
                     (i == j ? 1.0 : 0.0)) < 1e-10);
}

TEST_CASE("kabsch recovers an exact rigid copy") {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const auto ref = random_cloud(rng, 4, 3);
    const auto r = oracles::random_rotation3(rng);
    const std::array<double, 3> t{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const auto x = oracles::rigid_transform3(ref, r, t);
    CHECK(kabsch_align(x, ref, 3).transform.rmsd < 1e-9);
  }
}

TEST_CASE("kabsch matches a brute-force rotation grid") {
  // oracle: dense axis-angle scan (about 2 degree resolution) of the centered
  // clouds; kabsch must never be worse, and the grid must come close
  Rng rng(13);
  for (int rep = 0; rep < 3; ++rep) {
    const auto x = random_cloud(rng, 4, 3);
    const auto ref = random_cloud(rng, 4, 3);
    const auto res = kabsch_align(x, ref, 3);

    double cx[3] = {0, 0, 0}, cr[3] = {0, 0, 0};
    for (int p = 0; p < 4; ++p)
      for (int a = 0; a < 3; ++a) {
        cx[a] += x[static_cast<std::size_t>(p) * 3 + a] / 4.0;
        cr[a] += ref[static_cast<std::size_t>(p) * 3 + a] / 4.0;
      }

    double best = 1e300;
    const int n_theta = 45, n_phi = 90, n_ang = 180;  // 2 deg in the spin angle
    for (int it = 0; it <= n_theta; ++it) {
      const double th = kPi * it / n_theta;
      for (int ip = 0; ip < n_phi; ++ip) {
        const double ph = 2.0 * kPi * ip / n_phi;
        const double ax = std::sin(th) * std::cos(ph);
        const double ay = std::sin(th) * std::sin(ph);
        const double az = std::cos(th);
        for (int ia = 0; ia < n_ang; ++ia) {
          const double ang = 2.0 * kPi * ia / n_ang;
          const double c = std::cos(ang), s = std::sin(ang), u = 1.0 - c;
          const double rot[9] = {c + ax * ax * u,      ax * ay * u - az * s, ax * az * u + ay * s,
                                 ay * ax * u + az * s, c + ay * ay * u,      ay * az * u - ax * s,
                                 az * ax * u - ay * s, az * ay * u + ax * s, c + az * az * u};
          double ss = 0.0;
          for (int p = 0; p < 4; ++p) {
            for (int a = 0; a < 3; ++a) {
              double acc = cr[a];
              for (int b = 0; b < 3; ++b)
                acc += rot[a * 3 + b] * (x[static_cast<std::size_t>(p) * 3 + b] - cx[b]);
              const double d = acc - ref[static_cast<std::size_t>(p) * 3 + a];
              ss += d * d;
            }
          }
          best = std::min(best, std::sqrt(ss / 4.0));
        }
      }
    }
    CHECK(res.transform.rmsd <= best + 1e-12);
    CHECK(best - res.transform.rmsd < 0.05);  // grid resolution slack
  }
}

TEST_CASE("alignment is invariant to rigid pre-transforms") {
  Rng rng(14);
  for (int rep = 0; rep < 25; ++rep) {
    const auto x = random_cloud(rng, 4, 3);
    const auto ref = random_cloud(rng, 4, 3);
    const auto r = oracles::random_rotation3(rng);
    const std::array<double, 3> t{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const auto moved = oracles::rigid_transform3(x, r, t);
    const auto a1 = kabsch_align(x, ref, 3).aligned;
    const auto a2 = kabsch_align(moved, ref, 3).aligned;
    for (std::size_t i = 0; i < a1.size(); ++i) CHECK(std::abs(a1[i] - a2[i]) < 1e-8);
  }
}

TEST_CASE("returned rotations are proper to 1e-10") {
  Rng rng(15);
  for (int rep = 0; rep < 50; ++rep) {
    const auto x = random_cloud(rng, 4, 3);
    const auto ref = random_cloud(rng, 4, 3);
    const auto t = kabsch_align(x, ref, 3).transform;
    CHECK(rotation_orthogonality(t) < 1e-10);
    CHECK(std::abs(rotation_det(t) - 1.0) < 1e-10);
  }
}

TEST_CASE("rmsd basics") {
  Rng rng(16);
  const auto x = random_cloud(rng, 4, 3);
  CHECK(rmsd(x, x, 3) < 1e-12);

  const auto r = oracles::random_rotation3(rng);
  const auto y = oracles::rigid_transform3(x, r, {0.3, -0.7, 2.0});
  CHECK(rmsd(x, y, 3) < 1e-9);

  // symmetry
  const auto z = random_cloud(rng, 4, 3);
  CHECK(std::abs(rmsd(x, z, 3) - rmsd(z, x, 3)) < 1e-9);

  // 1D pair: centering removes the offset entirely
  CHECK(rmsd({0.0}, {3.0}, 1) < 1e-12);

  // aligned rmsd never exceeds the centered unaligned residual
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_cloud(rng, 5, 3);
    const auto b = random_cloud(rng, 5, 3);
    double ca[3] = {0, 0, 0}, cb[3] = {0, 0, 0};
    for (int p = 0; p < 5; ++p)
      for (int k = 0; k < 3; ++k) {
        ca[k] += a[static_cast<std::size_t>(p) * 3 + k] / 5.0;
        cb[k] += b[static_cast<std::size_t>(p) * 3 + k] / 5.0;
      }
    double ss = 0.0;
    for (int p = 0; p < 5; ++p)
      for (int k = 0; k < 3; ++k) {
        const double d = (a[static_cast<std::size_t>(p) * 3 + k] - ca[k]) -
                         (b[static_cast<std::size_t>(p) * 3 + k] - cb[k]);
        ss += d * d;
      }
    CHECK(rmsd(a, b, 3) <= std::sqrt(ss / 5.0) + 1e-12);
  }
}

TEST_CASE("kabsch 2d and degenerate cases") {
  Rng rng(17);
  // 2D rigid copy
  Configuration ref{0.0, 0.0, 1.0, 0.0, 0.7, 1.3};
  const double th = 1.1;
  Configuration x(6);
  for (int p = 0; p < 3; ++p) {
    const double px = ref[static_cast<std::size_t>(p) * 2], py = ref[static_cast<std::size_t>(p) * 2 + 1];
    x[static_cast<std::size_t>(p) * 2] = std::cos(th) * px - std::sin(th) * py + 0.4;
    x[static_cast<std::size_t>(p) * 2 + 1] = std::sin(th) * px + std::cos(th) * py - 0.9;
  }
  CHECK(rmsd(x, ref, 2) < 1e-9);

  // collinear 3D cloud still yields a proper minimizing rotation
  Configuration line{0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0};
  const auto moved = oracles::rigid_transform3(line, oracles::random_rotation3(rng), {1, 2, 3});
  const auto res = kabsch_align(moved, line, 3);
  CHECK(res.transform.rmsd < 1e-9);
  CHECK(std::abs(rotation_det(res.transform) - 1.0) < 1e-10);

  CHECK_THROWS_AS(kabsch_align({0.0, 0.0}, {0.0}, 1), ContractError);
}

TEST_CASE("dihedral conventions") {
  // planar anti (trans): pi
  const double p1[3] = {1, 1, 0}, p2[3] = {1, 0, 0}, p3[3] = {2, 0, 0}, p4[3] = {2, -1, 0};
  CHECK(std::abs(dihedral(p1, p2, p3, p4) - kPi) < 1e-12);
  // planar syn (cis): 0
  const double q4[3] = {2, 1, 0};
  CHECK(std::abs(dihedral(p1, p2, p3, q4)) < 1e-12);
}

TEST_CASE("dihedral is rotation invariant and sign-consistent") {
  Rng rng(18);
  for (int rep = 0; rep < 30; ++rep) {
    Configuration pts = random_cloud(rng, 4, 3, 1.0);
    double phi;
    try {
      phi = dihedral(&pts[0], &pts[3], &pts[6], &pts[9]);
    } catch (const DegenerateError&) {
      continue;
    }
    const auto r = oracles::random_rotation3(rng);
    const std::array<double, 3> t{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const auto moved = oracles::rigid_transform3(pts, r, t);
    const double phi2 = dihedral(&moved[0], &moved[3], &moved[6], &moved[9]);
    CHECK(std::abs(phi - phi2) < 1e-12);
  }
}

TEST_CASE("dihedral rejects collinear triples") {
  const double p1[3] = {0, 0, 0}, p2[3] = {1, 0, 0}, p3[3] = {2, 0, 0}, p4[3] = {3, 1, 0};
  CHECK_THROWS_AS(dihedral(p1, p2, p3, p4), DegenerateError);
}

TEST_CASE("dihedral gradient matches finite differences") {
  Rng rng(19);
  int checked = 0;
  while (checked < 20) {
    Configuration pts = random_cloud(rng, 4, 3);
    try {
      geometry::dihedral(&pts[0], &pts[3], &pts[6], &pts[9]);
    } catch (const DegenerateError&) {
      continue;
    }
    const auto g = geometry::dihedral_gradient(&pts[0], &pts[3], &pts[6], &pts[9]);
    const auto fn = [&](const std::vector<double>& v) {
      return geometry::dihedral(&v[0], &v[3], &v[6], &v[9]);
    };
    const auto fd = oracles::fd_gradient(fn, pts, 1e-6);
    std::vector<double> flat(12);
    for (int p = 0; p < 4; ++p)
      for (int k = 0; k < 3; ++k) flat[static_cast<std::size_t>(p) * 3 + k] = g[p][k];
    CHECK(oracles::max_rel_err(flat, fd, 1e-7) < 1e-5);
    ++checked;
  }
}

TEST_CASE("place_dihedral round-trips bond, angle, torsion") {
  Rng rng(20);
  for (int rep = 0; rep < 30; ++rep) {
    const double a[3] = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double b[3] = {a[0] + 1.0, a[1], a[2]};
    const double c[3] = {b[0] + 0.3, b[1] + 1.1, b[2]};
    const double bond = 0.5 + rng.uniform();
    const double angle = 0.5 + 2.0 * rng.uniform();
    const double torsion = (2.0 * rng.uniform() - 1.0) * (kPi - 1e-6);
    const auto d = geometry::place_dihedral(a, b, c, bond, angle, torsion);

    const double rb = std::sqrt((d[0] - c[0]) * (d[0] - c[0]) + (d[1] - c[1]) * (d[1] - c[1]) +
                                (d[2] - c[2]) * (d[2] - c[2]));
    CHECK(rb == doctest::Approx(bond).epsilon(1e-10));
    CHECK(geometry::dihedral(a, b, c, d.data()) == doctest::Approx(torsion).epsilon(1e-9));
  }
}
