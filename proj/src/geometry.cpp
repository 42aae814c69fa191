// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>

namespace tlc::geometry {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_dims(const Configuration& x, const Configuration& ref, int spatial_dim,
                const char* who) {
  if (spatial_dim < 1 || spatial_dim > 3)
    throw ContractError(std::string(who) + ": spatial_dim must be 1, 2 or 3");
  if (x.size() != ref.size())
    throw ContractError(std::string(who) + ": size mismatch");
  if (x.empty() || x.size() % static_cast<std::size_t>(spatial_dim) != 0)
    throw ContractError(std::string(who) + ": size not a multiple of spatial_dim");
}

inline void cross3(const double* a, const double* b, double* out) {
  out[0] = a[1] * b[2] - a[2] * b[1];
  out[1] = a[2] * b[0] - a[0] * b[2];
  out[2] = a[0] * b[1] - a[1] * b[0];
}

inline double dot3(const double* a, const double* b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm3(const double* a) { return std::sqrt(dot3(a, a)); }

}  // namespace

AlignResult kabsch_align(const Configuration& x, const Configuration& ref, int spatial_dim) {
  check_dims(x, ref, spatial_dim, "kabsch_align");
  const int d = spatial_dim;
  const int n = static_cast<int>(x.size()) / d;

  Eigen::VectorXd cx = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd cr = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      cx[k] += x[static_cast<std::size_t>(i) * d + k];
      cr[k] += ref[static_cast<std::size_t>(i) * d + k];
    }
  }
  cx /= n;
  cr /= n;

  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(d, d);
  if (d >= 2) {
    // Covariance H = sum (x_i - cx)(ref_i - cr)^T; R = V S U^T from H = U S V^T.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          h(a, b) += (x[static_cast<std::size_t>(i) * d + a] - cx[a]) *
                     (ref[static_cast<std::size_t>(i) * d + b] - cr[b]);
        }
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();
    double sign = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    Eigen::VectorXd s = Eigen::VectorXd::Ones(d);
    s[d - 1] = sign;  // JacobiSVD sorts singular values descending
    rot = v * s.asDiagonal() * u.transpose();
  }

  AlignResult out;
  out.aligned.resize(x.size());
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) {
      double acc = cr[a];
      for (int b = 0; b < d; ++b)
        acc += rot(a, b) * (x[static_cast<std::size_t>(i) * d + b] - cx[b]);
      out.aligned[static_cast<std::size_t>(i) * d + a] = acc;
      const double r = acc - ref[static_cast<std::size_t>(i) * d + a];
      ss += r * r;
    }
  }

  out.transform.spatial_dim = d;
  out.transform.rmsd = std::sqrt(ss / n);
  out.transform.rotation.resize(static_cast<std::size_t>(d) * d);
  out.transform.translation.resize(d);
  Eigen::VectorXd t = cr - rot * cx;
  for (int a = 0; a < d; ++a) {
    out.transform.translation[a] = t[a];
    for (int b = 0; b < d; ++b)
      out.transform.rotation[static_cast<std::size_t>(a) * d + b] = rot(a, b);
  }
  return out;
}

double rmsd(const Configuration& x, const Configuration& y, int spatial_dim) {
  return kabsch_align(x, y, spatial_dim).transform.rmsd;
}

double dihedral(const double* p1, const double* p2, const double* p3, const double* p4) {
  double b1[3], b2[3], b3[3];
  for (int k = 0; k < 3; ++k) {
    b1[k] = p2[k] - p1[k];
    b2[k] = p3[k] - p2[k];
    b3[k] = p4[k] - p3[k];
  }
  double n1[3], n2[3], m1[3];
  cross3(b1, b2, n1);
  cross3(b2, b3, n2);
  const double lb2 = norm3(b2);
  const double scale = std::max({norm3(b1), lb2, norm3(b3)});
  if (norm3(n1) <= 1e-12 * scale * scale || norm3(n2) <= 1e-12 * scale * scale)
    throw DegenerateError("dihedral: collinear consecutive points");
  // m1 completes a right-handed frame with n1 and b2.
  double b2u[3] = {b2[0] / lb2, b2[1] / lb2, b2[2] / lb2};
  cross3(n1, b2u, m1);
  const double xc = dot3(n1, n2);
  const double yc = dot3(m1, n2);
  double phi = std::atan2(yc, xc);
  if (phi <= -kPi) phi = kPi;  // fold the -pi branch onto +pi
  return phi;
}

std::array<std::array<double, 3>, 4> dihedral_gradient(const double* p1, const double* p2,
                                                       const double* p3, const double* p4) {
  double b1[3], b2[3], b3[3];
  for (int k = 0; k < 3; ++k) {
    b1[k] = p2[k] - p1[k];
    b2[k] = p3[k] - p2[k];
    b3[k] = p4[k] - p3[k];
  }
  double n1[3], n2[3];
  cross3(b1, b2, n1);
  cross3(b2, b3, n2);
  const double ln1sq = dot3(n1, n1);
  const double ln2sq = dot3(n2, n2);
  const double lb2 = norm3(b2);
  const double scale = std::max({norm3(b1), lb2, norm3(b3)});
  if (std::sqrt(ln1sq) <= 1e-12 * scale * scale || std::sqrt(ln2sq) <= 1e-12 * scale * scale)
    throw DegenerateError("dihedral_gradient: collinear consecutive points");

  // endpoint gradients are normal to the flanking planes; the inner points
  // follow from translation invariance and the torque balance about b2
  std::array<std::array<double, 3>, 4> g{};
  double g1[3], g4[3];
  for (int k = 0; k < 3; ++k) {
    g1[k] = (lb2 / ln1sq) * n1[k];
    g4[k] = -(lb2 / ln2sq) * n2[k];
  }
  const double c12 = dot3(b1, b2) / (lb2 * lb2);
  const double c32 = dot3(b3, b2) / (lb2 * lb2);
  for (int k = 0; k < 3; ++k) {
    g[0][k] = g1[k];
    g[1][k] = -(1.0 + c12) * g1[k] + c32 * g4[k];
    g[2][k] = -(1.0 + c32) * g4[k] + c12 * g1[k];
    g[3][k] = g4[k];
  }
  return g;
}

std::array<double, 3> place_dihedral(const double* a, const double* b, const double* c,
                                     double bond, double angle, double torsion) {
  double bc[3], ab[3];
  for (int k = 0; k < 3; ++k) {
    bc[k] = c[k] - b[k];
    ab[k] = b[k] - a[k];
  }
  const double lbc = norm3(bc);
  if (lbc <= 0.0) throw DegenerateError("place_dihedral: coincident b and c");
  double bcu[3] = {bc[0] / lbc, bc[1] / lbc, bc[2] / lbc};
  double nref[3], n[3];
  cross3(ab, bcu, nref);
  const double lnref = norm3(nref);
  if (lnref <= 1e-12 * std::max(norm3(ab), 1.0))
    throw DegenerateError("place_dihedral: collinear a, b, c");
  for (int k = 0; k < 3; ++k) n[k] = nref[k] / lnref;
  double m[3];
  cross3(n, bcu, m);

  // local displacement: along -bc by cos(angle), off-axis by sin(angle)
  const double dx = -bond * std::cos(angle);
  const double dy = bond * std::sin(angle) * std::cos(torsion);
  const double dz = -bond * std::sin(angle) * std::sin(torsion);
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) out[k] = c[k] + dx * bcu[k] + dy * m[k] + dz * n[k];
  return out;
}

}  // namespace tlc::geometry
