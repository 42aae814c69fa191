// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/systems.hpp"

#include <algorithm>
#include <cmath>

#include "tlc/geometry.hpp"

namespace tlc::systems {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Standard Muller-Brown stationary points (frozen; they parameterize the
// ground-truth coordinate, independent of any runtime minimizer).
constexpr double kMbMinA[2] = {-0.558223634633024, 1.441725841804669};
constexpr double kMbMinB[2] = {0.6234994049767136, 0.02803775852509236};
constexpr double kMbSaddle[2] = {-0.822001558732732, 0.624312802814871};

void check_dim(const SystemSpec& sys, const Configuration& x, const char* who) {
  if (static_cast<int>(x.size()) != sys.dim())
    throw ContractError(std::string(who) + ": configuration dimension " +
                        std::to_string(x.size()) + " != " + std::to_string(sys.dim()));
}

void mb_axis(double& ux, double& uy) {
  const double dx = kMbMinA[0] - kMbMinB[0];
  const double dy = kMbMinA[1] - kMbMinB[1];
  const double n = std::sqrt(dx * dx + dy * dy);
  ux = dx / n;
  uy = dy / n;
}

double angle_at(const double* pi, const double* pj, const double* pk, double grad[3][3]) {
  double u[3], v[3];
  for (int d = 0; d < 3; ++d) {
    u[d] = pi[d] - pj[d];
    v[d] = pk[d] - pj[d];
  }
  const double lu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  const double lv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (lu <= 0.0 || lv <= 0.0) throw DegenerateError("angle: coincident points");
  double cosv = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (lu * lv);
  cosv = std::clamp(cosv, -1.0, 1.0);
  const double theta = std::acos(cosv);
  if (grad != nullptr) {
    const double sinv = std::max(std::sqrt(1.0 - cosv * cosv), 1e-12);
    for (int d = 0; d < 3; ++d) {
      const double uh = u[d] / lu;
      const double vh = v[d] / lv;
      grad[0][d] = (cosv * uh - vh) / (lu * sinv);  // d theta / d pi
      grad[2][d] = (cosv * vh - uh) / (lv * sinv);  // d theta / d pk
      grad[1][d] = -grad[0][d] - grad[2][d];
    }
  }
  return theta;
}

// Energy and (optionally) -grad U accumulated into f.
double butane_energy(const Butane4Params& p, const Configuration& x, Configuration* f) {
  const double* pt[4] = {&x[0], &x[3], &x[6], &x[9]};
  double energy = 0.0;

  for (int b = 0; b < 3; ++b) {
    const double* a = pt[b];
    const double* c = pt[b + 1];
    double d[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (r <= 0.0) throw DegenerateError("butane4: coincident bonded particles");
    const double dr = r - p.bond_r0;
    energy += 0.5 * p.bond_k * dr * dr;
    if (f != nullptr) {
      const double coef = p.bond_k * dr / r;
      for (int k = 0; k < 3; ++k) {
        (*f)[static_cast<std::size_t>(b) * 3 + k] += coef * d[k];
        (*f)[static_cast<std::size_t>(b + 1) * 3 + k] -= coef * d[k];
      }
    }
  }

  for (int a0 = 0; a0 < 2; ++a0) {
    double grad[3][3];
    const double theta = angle_at(pt[a0], pt[a0 + 1], pt[a0 + 2], f ? grad : nullptr);
    const double dth = theta - p.angle_theta0;
    energy += 0.5 * p.angle_k * dth * dth;
    if (f != nullptr) {
      const double coef = p.angle_k * dth;
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          (*f)[static_cast<std::size_t>(a0 + j) * 3 + k] -= coef * grad[j][k];
    }
  }

  const double phi = geometry::dihedral(pt[0], pt[1], pt[2], pt[3]);
  energy += p.torsion_c * (1.0 + std::cos(3.0 * phi));
  if (f != nullptr) {
    const double dudphi = -3.0 * p.torsion_c * std::sin(3.0 * phi);
    const auto g = geometry::dihedral_gradient(pt[0], pt[1], pt[2], pt[3]);
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 3; ++k)
        (*f)[static_cast<std::size_t>(j) * 3 + k] -= dudphi * g[j][k];
  }
  return energy;
}

double mb_energy(const MullerBrownParams& p, double x, double y, double* fx, double* fy) {
  double u = 0.0, gx = 0.0, gy = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double dx = x - p.x0[i];
    const double dy = y - p.y0[i];
    const double e = p.amp[i] * std::exp(p.a[i] * dx * dx + p.b[i] * dx * dy + p.c[i] * dy * dy);
    u += e;
    gx += e * (2.0 * p.a[i] * dx + p.b[i] * dy);
    gy += e * (p.b[i] * dx + 2.0 * p.c[i] * dy);
  }
  if (fx != nullptr) *fx = -gx;
  if (fy != nullptr) *fy = -gy;
  return u;
}

// Damped Newton with finite-difference Hessian; the toy surfaces are smooth
// and the starting guesses sit inside the target wells.
Configuration refine_minimum(const SystemSpec& sys, Configuration x, int iters) {
  const int n = sys.dim();
  for (int it = 0; it < iters; ++it) {
    Configuration g = force(sys, x);
    for (double& v : g) v = -v;  // gradient
    double gnorm = 0.0;
    for (double v : g) gnorm = std::max(gnorm, std::abs(v));
    if (gnorm < 1e-13) break;
    // FD Hessian columns from analytic gradients
    std::vector<double> hess(static_cast<std::size_t>(n) * n);
    const double h = 1e-6;
    for (int j = 0; j < n; ++j) {
      Configuration xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      Configuration gp = force(sys, xp), gm = force(sys, xm);
      for (int i = 0; i < n; ++i)
        hess[static_cast<std::size_t>(i) * n + j] = -(gp[i] - gm[i]) / (2.0 * h);
    }
    // solve H s = -g by Gaussian elimination with partial pivoting
    std::vector<double> a = hess;
    Configuration s(n);
    for (int i = 0; i < n; ++i) s[i] = -g[i];
    for (int col = 0; col < n; ++col) {
      int piv = col;
      for (int r = col + 1; r < n; ++r)
        if (std::abs(a[static_cast<std::size_t>(r) * n + col]) >
            std::abs(a[static_cast<std::size_t>(piv) * n + col]))
          piv = r;
      if (std::abs(a[static_cast<std::size_t>(piv) * n + col]) < 1e-14) {
        s.assign(n, 0.0);
        break;
      }
      if (piv != col) {
        for (int c = 0; c < n; ++c)
          std::swap(a[static_cast<std::size_t>(piv) * n + c],
                    a[static_cast<std::size_t>(col) * n + c]);
        std::swap(s[piv], s[col]);
      }
      for (int r = col + 1; r < n; ++r) {
        const double m = a[static_cast<std::size_t>(r) * n + col] /
                         a[static_cast<std::size_t>(col) * n + col];
        for (int c = col; c < n; ++c)
          a[static_cast<std::size_t>(r) * n + c] -= m * a[static_cast<std::size_t>(col) * n + c];
        s[r] -= m * s[col];
      }
    }
    for (int i = n - 1; i >= 0; --i) {
      double acc = s[i];
      for (int c = i + 1; c < n; ++c) acc -= a[static_cast<std::size_t>(i) * n + c] * s[c];
      const double d = a[static_cast<std::size_t>(i) * n + i];
      s[i] = std::abs(d) < 1e-14 ? 0.0 : acc / d;
    }
    // backtrack on energy
    double step = 1.0;
    const double e0 = potential_energy(sys, x);
    for (int bt = 0; bt < 30; ++bt) {
      Configuration xt = x;
      for (int i = 0; i < n; ++i) xt[i] += step * s[i];
      if (potential_energy(sys, xt) < e0 + 1e-15) {
        x = xt;
        break;
      }
      step *= 0.5;
    }
  }
  return x;
}

}  // namespace

SystemSpec SystemSpec::double_well_1d(double a, double tilt) {
  SystemSpec s;
  s.kind = SystemKind::DoubleWell1d;
  s.params = DoubleWellParams{a, tilt};
  s.particle_count = 1;
  s.spatial_dim = 1;
  s.masses = {1.0};
  s.basin_threshold = 0.0;
  return s;
}

SystemSpec SystemSpec::muller_brown_2d() {
  SystemSpec s;
  s.kind = SystemKind::MullerBrown2d;
  s.params = MullerBrownParams{};
  s.particle_count = 1;
  s.spatial_dim = 2;
  s.masses = {1.0};
  s.basin_threshold = 0.0;
  return s;
}

SystemSpec SystemSpec::butane4() {
  SystemSpec s;
  s.kind = SystemKind::Butane4;
  s.params = Butane4Params{};
  s.particle_count = 4;
  s.spatial_dim = 3;
  s.masses = {1.0, 1.0, 1.0, 1.0};
  s.basin_threshold = 2.0 * kPi / 3.0;
  return s;
}

std::map<std::string, double> SystemSpec::parameter_map() const {
  std::map<std::string, double> m;
  if (const auto* dw = std::get_if<DoubleWellParams>(&params)) {
    m["a"] = dw->a;
    m["tilt"] = dw->tilt;
  } else if (const auto* mb = std::get_if<MullerBrownParams>(&params)) {
    for (int i = 0; i < 4; ++i) {
      const std::string sfx = std::to_string(i);
      m["amp" + sfx] = mb->amp[i];
      m["a" + sfx] = mb->a[i];
      m["b" + sfx] = mb->b[i];
      m["c" + sfx] = mb->c[i];
      m["x0" + sfx] = mb->x0[i];
      m["y0" + sfx] = mb->y0[i];
    }
  } else if (const auto* bt = std::get_if<Butane4Params>(&params)) {
    m["bond_k"] = bt->bond_k;
    m["bond_r0"] = bt->bond_r0;
    m["angle_k"] = bt->angle_k;
    m["angle_theta0"] = bt->angle_theta0;
    m["torsion_c"] = bt->torsion_c;
  }
  return m;
}

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::DoubleWell1d: return "doublewell1d";
    case SystemKind::MullerBrown2d: return "mullerbrown2d";
    case SystemKind::Butane4: return "butane4";
  }
  return "unknown";
}

SystemKind system_kind_from_string(const std::string& name) {
  if (name == "doublewell1d") return SystemKind::DoubleWell1d;
  if (name == "mullerbrown2d") return SystemKind::MullerBrown2d;
  if (name == "butane4") return SystemKind::Butane4;
  throw ConfigError("unknown system kind: " + name);
}

double potential_energy(const SystemSpec& sys, const Configuration& x) {
  check_dim(sys, x, "potential_energy");
  switch (sys.kind) {
    case SystemKind::DoubleWell1d: {
      const auto& p = std::get<DoubleWellParams>(sys.params);
      const double q = x[0] * x[0] - 1.0;
      return p.a * q * q + p.tilt * x[0];
    }
    case SystemKind::MullerBrown2d:
      return mb_energy(std::get<MullerBrownParams>(sys.params), x[0], x[1], nullptr, nullptr);
    case SystemKind::Butane4:
      return butane_energy(std::get<Butane4Params>(sys.params), x, nullptr);
  }
  throw ContractError("potential_energy: bad kind");
}

void force_into(const SystemSpec& sys, const Configuration& x, Configuration& f) {
  check_dim(sys, x, "force");
  f.assign(x.size(), 0.0);
  switch (sys.kind) {
    case SystemKind::DoubleWell1d: {
      const auto& p = std::get<DoubleWellParams>(sys.params);
      f[0] = -(4.0 * p.a * x[0] * (x[0] * x[0] - 1.0) + p.tilt);
      return;
    }
    case SystemKind::MullerBrown2d: {
      mb_energy(std::get<MullerBrownParams>(sys.params), x[0], x[1], &f[0], &f[1]);
      return;
    }
    case SystemKind::Butane4:
      butane_energy(std::get<Butane4Params>(sys.params), x, &f);
      return;
  }
  throw ContractError("force: bad kind");
}

Configuration force(const SystemSpec& sys, const Configuration& x) {
  Configuration f;
  force_into(sys, x, f);
  return f;
}

double ground_truth_cv(const SystemSpec& sys, const Configuration& x) {
  check_dim(sys, x, "ground_truth_cv");
  switch (sys.kind) {
    case SystemKind::DoubleWell1d: return x[0];
    case SystemKind::MullerBrown2d: {
      double ux, uy;
      mb_axis(ux, uy);
      return ux * (x[0] - kMbSaddle[0]) + uy * (x[1] - kMbSaddle[1]);
    }
    case SystemKind::Butane4: return geometry::dihedral(&x[0], &x[3], &x[6], &x[9]);
  }
  throw ContractError("ground_truth_cv: bad kind");
}

double basin_coordinate(const SystemSpec& sys, const Configuration& x) {
  const double cv = ground_truth_cv(sys, x);
  return sys.kind == SystemKind::Butane4 ? std::abs(cv) : cv;
}

Configuration basin_coordinate_gradient(const SystemSpec& sys, const Configuration& x) {
  check_dim(sys, x, "basin_coordinate_gradient");
  switch (sys.kind) {
    case SystemKind::DoubleWell1d: return {1.0};
    case SystemKind::MullerBrown2d: {
      double ux, uy;
      mb_axis(ux, uy);
      return {ux, uy};
    }
    case SystemKind::Butane4: {
      const double phi = geometry::dihedral(&x[0], &x[3], &x[6], &x[9]);
      const double sgn = phi >= 0.0 ? 1.0 : -1.0;
      const auto g = geometry::dihedral_gradient(&x[0], &x[3], &x[6], &x[9]);
      Configuration out(12);
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 3; ++k) out[static_cast<std::size_t>(j) * 3 + k] = sgn * g[j][k];
      return out;
    }
  }
  throw ContractError("basin_coordinate_gradient: bad kind");
}

BasinLabel basin_of(const SystemSpec& sys, const Configuration& x) {
  return basin_coordinate(sys, x) >= sys.basin_threshold ? BasinLabel::A : BasinLabel::B;
}

Configuration butane4_chain(const Butane4Params& p, double torsion) {
  Configuration x(12, 0.0);
  // p1 at angle theta0 from the +x axis; p2 at origin; p3 on +x
  x[0] = p.bond_r0 * std::cos(p.angle_theta0);
  x[1] = p.bond_r0 * std::sin(p.angle_theta0);
  x[3] = 0.0;
  x[6] = p.bond_r0;
  const auto p4 = geometry::place_dihedral(&x[0], &x[3], &x[6], p.bond_r0, p.angle_theta0, torsion);
  x[9] = p4[0];
  x[10] = p4[1];
  x[11] = p4[2];
  return x;
}

Configuration basin_minimum(const SystemSpec& sys, BasinLabel basin) {
  switch (sys.kind) {
    case SystemKind::DoubleWell1d: {
      Configuration x{basin == BasinLabel::A ? 1.0 : -1.0};
      return refine_minimum(sys, x, 50);
    }
    case SystemKind::MullerBrown2d: {
      Configuration x = basin == BasinLabel::A ? Configuration{kMbMinA[0], kMbMinA[1]}
                                               : Configuration{kMbMinB[0], kMbMinB[1]};
      return refine_minimum(sys, x, 50);
    }
    case SystemKind::Butane4: {
      const auto& p = std::get<Butane4Params>(sys.params);
      return butane4_chain(p, basin == BasinLabel::A ? kPi : kPi / 3.0);
    }
  }
  throw ContractError("basin_minimum: bad kind");
}

Configuration reference_configuration(const SystemSpec& sys) {
  return basin_minimum(sys, BasinLabel::A);
}

}  // namespace tlc::systems
