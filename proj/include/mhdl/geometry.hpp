#pragma once

// Flow-map calculus: deformation gradient, cofactor matrix A = (grad eta)^{-T},
// Jacobian, pulled-back differential operators and boundary normals.
//
// A FlowMap stores only the horizontally periodic displacement d = eta - x, so
// every grid derivative acts on periodic data and the identity part is exact.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mhdl/errors.hpp"
#include "mhdl/grid.hpp"

namespace mhdl {

struct FlowMap {
  VectorField displacement;

  FlowMap() = default;
  explicit FlowMap(const GridSpec& g) : displacement(g) {}
  explicit FlowMap(VectorField d) : displacement(std::move(d)) {}

  static FlowMap identity(const GridSpec& g) { return FlowMap(g); }

  // Builds the map from sampled positions eta(x).
  static FlowMap from_positions(const VectorField& eta) {
    FlowMap m(eta);
    const auto& g = eta.grid();
    for (int k = 0; k < g.levels(); ++k)
      for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) {
          m.displacement[0].at(i, j, k) -= g.x1(i);
          m.displacement[1].at(i, j, k) -= g.x2(j);
          m.displacement[2].at(i, j, k) -= g.x3(k);
        }
    return m;
  }

  const GridSpec& grid() const noexcept { return displacement.grid(); }

  VectorField positions() const {
    VectorField eta = displacement;
    const auto& g = grid();
    for (int k = 0; k < g.levels(); ++k)
      for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) {
          eta[0].at(i, j, k) += g.x1(i);
          eta[1].at(i, j, k) += g.x2(j);
          eta[2].at(i, j, k) += g.x3(k);
        }
    return eta;
  }

  bool operator==(const FlowMap&) const = default;
};

struct CofactorData {
  TensorField grad_eta;  // F_ij = d_j eta_i
  TensorField A;         // F^{-T}
  ScalarField J;         // det F
};

struct CofactorOptions {
  double j_min = 0.5;
  bool enforce_band = false;  // hard error when |A - I| leaves the band
  double band = 0.125;
};

// F_ij = delta_ij + d_j d_i.
inline TensorField deformation_gradient(const FlowMap& eta) {
  TensorField F = jacobian(eta.displacement);
  for (int i = 0; i < 3; ++i)
    for (auto& x : F(i, i).raw()) x += 1.0;
  return F;
}

// Pointwise adjugate inversion. JA equals the cofactor matrix of F.
inline CofactorData cofactor_from_gradient(TensorField F, const CofactorOptions& opt = {}) {
  const auto& g = F.grid();
  CofactorData out{std::move(F), TensorField(g), ScalarField(g)};
  const auto& f = out.grad_eta;
  double jmin = INFINITY;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double a = f(0, 0)[n], b = f(0, 1)[n], c = f(0, 2)[n];
    const double d = f(1, 0)[n], e = f(1, 1)[n], h = f(1, 2)[n];
    const double p = f(2, 0)[n], q = f(2, 1)[n], r = f(2, 2)[n];
    const std::array<double, 9> C{e * r - h * q, h * p - d * r, d * q - e * p,
                                  c * q - b * r, a * r - c * p, b * p - a * q,
                                  b * h - c * e, c * d - a * h, a * e - b * d};
    const double J = a * C[0] + b * C[1] + c * C[2];
    out.J[n] = J;
    jmin = std::min(jmin, J);
    const double inv = 1.0 / J;
    for (int m = 0; m < 9; ++m) out.A.c[m][n] = C[m] * inv;
  }
  if (!(jmin >= opt.j_min))
    throw SingularMap("cofactor: Jacobian " + std::to_string(jmin) + " below floor " +
                          std::to_string(opt.j_min),
                      jmin);
  if (opt.enforce_band) {
    double dev = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (double x : out.A(i, j).values()) dev = std::max(dev, std::abs(x - (i == j ? 1.0 : 0.0)));
    if (dev > opt.band)
      throw SingularMap("cofactor: |A - I| = " + std::to_string(dev) + " exceeds band", jmin);
  }
  return out;
}

inline CofactorData cofactor(const FlowMap& eta, const CofactorOptions& opt = {}) {
  return cofactor_from_gradient(deformation_gradient(eta), opt);
}

// max |J - 1|
inline double j_deviation(const CofactorData& cof) {
  double m = 0.0;
  for (double x : cof.J.values()) m = std::max(m, std::abs(x - 1.0));
  return m;
}

// max |A_ij - delta_ij|
inline double a_deviation(const CofactorData& cof) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (double x : cof.A(i, j).values()) m = std::max(m, std::abs(x - (i == j ? 1.0 : 0.0)));
  return m;
}

// d_j (J A_ij), zero in the continuum.
inline VectorField piola_residual(const CofactorData& cof) {
  const auto& g = cof.J.grid();
  VectorField out(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i] += partial(cof.J * cof.A(i, j), j + 1);
  return out;
}

// b0_j d_j f
inline ScalarField directional(const VectorField& b0, const ScalarField& f) {
  auto d = gradient(f);
  ScalarField out(f.grid());
  for (int j = 0; j < 3; ++j)
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += b0[j][n] * d[j][n];
  return out;
}

inline VectorField directional(const VectorField& b0, const VectorField& u) {
  return {directional(b0, u[0]), directional(b0, u[1]), directional(b0, u[2])};
}

// (b0 . grad) eta, the frozen-in field.
inline VectorField pullback_field(const VectorField& b0, const FlowMap& eta) {
  VectorField b = directional(b0, eta.displacement);
  b += b0;
  return b;
}

// (b0 . grad)^2 eta
inline VectorField lorentz_force(const VectorField& b0, const FlowMap& eta) {
  return directional(b0, pullback_field(b0, eta));
}

// (grad_A q)_i = A_ij d_j q
inline VectorField grad_A(const ScalarField& q, const CofactorData& cof) {
  auto d = gradient(q);
  VectorField out(q.grid());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const auto& a = cof.A(i, j);
      for (std::size_t n = 0; n < q.size(); ++n) out[i][n] += a[n] * d[j][n];
    }
  return out;
}

// A_ij d_j u_i
inline ScalarField div_A(const VectorField& u, const CofactorData& cof) {
  ScalarField out(u.grid());
  for (int i = 0; i < 3; ++i) {
    auto d = gradient(u[i]);
    for (int j = 0; j < 3; ++j) {
      const auto& a = cof.A(i, j);
      for (std::size_t n = 0; n < out.size(); ++n) out[n] += a[n] * d[j][n];
    }
  }
  return out;
}

// (curl_A u)_i = eps_ijl A_jm d_m u_l
inline VectorField curl_A(const VectorField& u, const CofactorData& cof) {
  const auto& g = u.grid();
  std::array<VectorField, 3> du{gradient(u[0]), gradient(u[1]), gradient(u[2])};
  // (grad_A u_l)_j
  auto ga = [&](int j, int l, std::size_t n) {
    double s = 0.0;
    for (int m = 0; m < 3; ++m) s += cof.A(j, m)[n] * du[l][m][n];
    return s;
  };
  VectorField out(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    out[0][n] = ga(1, 2, n) - ga(2, 1, n);
    out[1][n] = ga(2, 0, n) - ga(0, 2, n);
    out[2][n] = ga(0, 1, n) - ga(1, 0, n);
  }
  return out;
}

// dA_ij = -A_il dF_ml A_mj
inline TensorField cofactor_variation(const CofactorData& cof, const TensorField& dF) {
  const auto& g = cof.J.grid();
  TensorField out(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    double M[3][3];  // dF^T A
    for (int l = 0; l < 3; ++l)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int m = 0; m < 3; ++m) s += dF(m, l)[n] * cof.A(m, j)[n];
        M[l][j] = s;
      }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int l = 0; l < 3; ++l) s += cof.A(i, l)[n] * M[l][j];
        out(i, j)[n] = -s;
      }
  }
  return out;
}

// dJ = J A_ij dF_ij
inline ScalarField jacobian_variation(const CofactorData& cof, const TensorField& dF) {
  const auto& g = cof.J.grid();
  ScalarField out(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (std::size_t n = 0; n < g.size(); ++n) out[n] += cof.A(i, j)[n] * dF(i, j)[n];
  for (std::size_t n = 0; n < g.size(); ++n) out[n] *= cof.J[n];
  return out;
}

// || (J1 - J0)/delta - J0 A0_ij (F1 - F0)_ij / delta ||_0
inline double identity_dJ_check(const FlowMap& eta0, const FlowMap& eta1, double delta) {
  const auto c0 = cofactor(eta0);
  const auto c1 = cofactor(eta1);
  TensorField dF(eta0.grid());
  for (int m = 0; m < 9; ++m) dF.c[m] = (1.0 / delta) * (c1.grad_eta.c[m] - c0.grad_eta.c[m]);
  ScalarField diff = (1.0 / delta) * (c1.J - c0.J);
  diff -= jacobian_variation(c0, dF);
  return l2_norm(diff);
}

// Outward reference normal: -e3 on the bottom, +e3 on the top.
inline double reference_normal_sign(Face f) noexcept { return f == Face::top ? 1.0 : -1.0; }

// n = A N / |A N| on both faces, dim 3.
inline BoundaryField unit_normal(const CofactorData& cof) {
  const auto& g = cof.J.grid();
  BoundaryField n(g, 3);
  for (int face = 0; face < 2; ++face) {
    const Face f = Face(face);
    const int k = f == Face::top ? g.n3 : 0;
    const double s = reference_normal_sign(f);
    std::array<std::span<double>, 3> out{n.at(f, 0), n.at(f, 1), n.at(f, 2)};
    for (std::size_t p = 0; p < g.plane(); ++p) {
      const std::size_t idx = std::size_t(k) * g.plane() + p;
      const double a0 = s * cof.A(0, 2)[idx], a1 = s * cof.A(1, 2)[idx], a2 = s * cof.A(2, 2)[idx];
      const double len = std::sqrt(a0 * a0 + a1 * a1 + a2 * a2);
      out[0][p] = a0 / len;
      out[1][p] = a1 / len;
      out[2][p] = a2 / len;
    }
  }
  return n;
}

}  // namespace mhdl
