#pragma once

// Horizontal mollification by layers and the smoothed geometry built from it.
//
// Lambda_kappa is the Fourier multiplier m(kappa |2 pi k|) acting on each x3
// level (or face) separately; Lambda^2 applies m^2.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "mhdl/elliptic.hpp"
#include "mhdl/geometry.hpp"
#include "mhdl/grid.hpp"

namespace mhdl {

struct MollifierSpec {
  double kappa = 0.1;
  std::function<double(double)> multiplier = [](double r) { return std::exp(-r * r); };

  void validate() const {
    if (!(kappa > 0)) throw std::invalid_argument("MollifierSpec: kappa must be positive");
    if (!multiplier) throw std::invalid_argument("MollifierSpec: multiplier missing");
  }

  double symbol(int k1, int k2, int power) const {
    const double r = kappa * two_pi * std::sqrt(double(k1) * k1 + double(k2) * k2);
    return std::pow(multiplier(r), power);
  }
};

// Lambda_kappa^power f
inline ScalarField mollify(const ScalarField& f, const MollifierSpec& spec, int power = 1) {
  spec.validate();
  return apply_horizontal_symbol(f, [&](int k1, int k2) { return std::complex<double>(spec.symbol(k1, k2, power), 0.0); });
}

inline VectorField mollify(const VectorField& u, const MollifierSpec& spec, int power = 1) {
  return {mollify(u[0], spec, power), mollify(u[1], spec, power), mollify(u[2], spec, power)};
}

inline BoundaryField mollify(const BoundaryField& g, const MollifierSpec& spec, int power = 1) {
  spec.validate();
  return apply_horizontal_symbol(g, [&](int k1, int k2) { return std::complex<double>(spec.symbol(k1, k2, power), 0.0); });
}

// u + H(Lambda^2 u|Gamma - u|Gamma): the linear map taking eta to eta^kappa on
// displacements and d/dt eta to d/dt eta^kappa.
inline VectorField smooth_boundary_linear(const VectorField& u, const MollifierSpec& spec) {
  const BoundaryField tr = trace(u);
  const BoundaryField jump = mollify(tr, spec, 2) - tr;
  return u + harmonic_extension_vector(jump);
}

// eta^kappa: harmonic correction of eta whose trace is Lambda^2(eta|Gamma).
inline FlowMap boundary_smoother(const FlowMap& eta, const MollifierSpec& spec) {
  return FlowMap(smooth_boundary_linear(eta.displacement, spec));
}

namespace detail {

inline BoundaryField trace_entry(const TensorField& t, int i, int j) { return trace(t(i, j)); }

}  // namespace detail

// psi^kappa: harmonic extension, per component i, of
// Dstar^{-1} P (Dstar eta_j A_ja d_a Lambda^2 v_i - Dstar Lambda^2 eta_j A_ja d_a v_i),
// with a over the horizontal directions. A is the cofactor of eta^kappa.
inline VectorField modification_term(const FlowMap& eta, const VectorField& v, const CofactorData& cof_kappa,
                                     const MollifierSpec& spec) {
  const auto& g = v.grid();
  const BoundaryField d = trace(eta.displacement);
  const BoundaryField lap_d = surface_laplacian(d);
  const BoundaryField lap_ld = surface_laplacian(mollify(d, spec, 2));
  const BoundaryField bv = trace(v);
  const BoundaryField bl = mollify(bv, spec, 2);
  const std::array<BoundaryField, 2> dv{tangential_derivative(bv, 1), tangential_derivative(bv, 2)};
  const std::array<BoundaryField, 2> dl{tangential_derivative(bl, 1), tangential_derivative(bl, 2)};

  // c_a = sum_j (Dstar eta_j) A_ja and its mollified partner, per a in {1,2}.
  std::array<BoundaryField, 2> c{BoundaryField(g, 1), BoundaryField(g, 1)};
  std::array<BoundaryField, 2> cl{BoundaryField(g, 1), BoundaryField(g, 1)};
  for (int a = 0; a < 2; ++a)
    for (int j = 0; j < 3; ++j) {
      const BoundaryField A = detail::trace_entry(cof_kappa.A, j, a);
      c[a] += lap_d.component(j) * A;
      cl[a] += lap_ld.component(j) * A;
    }

  BoundaryField data(g, 3);
  for (int i = 0; i < 3; ++i) {
    BoundaryField s(g, 1);
    for (int a = 0; a < 2; ++a) {
      s += c[a] * dl[a].component(i);
      s -= cl[a] * dv[a].component(i);
    }
    data.set_component(i, inverse_surface_laplacian(s));
  }
  return harmonic_extension_vector(data);
}

// [Lambda_kappa, h] g = Lambda(h g) - h Lambda g
inline BoundaryField mollifier_commutator(const BoundaryField& h, const BoundaryField& g, const MollifierSpec& spec) {
  return mollify(h * g, spec) - h * mollify(g, spec);
}

}  // namespace mhdl
