#pragma once

// Initial data presets. Velocities and fields are discrete curls of vector
// potentials, so div v0 = 0 and div b0 = 0 hold to round-off on the grid;
// every b0 is tangent to both faces.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhdl/grid.hpp"

namespace mhdl {

struct InitialData {
  VectorField v0;
  VectorField b0;
};

struct PresetParams {
  double amplitude = 3e-4;
  double field = 0.5;   // magnetic strength
  double shear = 0.02;  // relative x3 variation of the horizontal field
  unsigned seed = 0;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"trivial", "steady_shear", "demo", "euler_wave", "vortex_violating",
                                              "random"};
  return names;
}

namespace detail {

inline VectorField horizontal_shear(const GridSpec& g, double strength, double shear) {
  VectorField b(g);
  b[0] = ScalarField::from_function(
      g, [&](double, double, double z) { return strength * (1.0 + shear * std::cos(std::numbers::pi * z)); });
  return b;
}

// curl (0, psi, 0) with psi = sin(2 pi x1) sinh(2 pi (x3 - 1/2)) / cosh(pi):
// the gradient of the harmonic cos(2 pi x1) cosh(2 pi (x3 - 1/2)) / cosh(pi).
inline VectorField potential_wave(const GridSpec& g, double amp) {
  const double pi = std::numbers::pi;
  VectorField a(g);
  a[1] = ScalarField::from_function(g, [&](double x, double, double z) {
    return amp * std::sin(2 * pi * x) * std::sinh(2 * pi * (z - 0.5)) / std::cosh(pi);
  });
  return curl(a);
}

// Band-limited random potential; with `vanish` it is zero on both faces.
inline VectorField random_potential(const GridSpec& g, double amp, std::mt19937_64& rng, bool vanish) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pi = std::numbers::pi;
  const int kmax = 2;
  VectorField a(g);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> coef;
    for (int p = -kmax; p <= kmax; ++p)
      for (int q = -kmax; q <= kmax; ++q)
        for (int r = 0; r < 3; ++r) coef.push_back(u(rng));
    a[c] = ScalarField::from_function(g, [&](double x, double y, double z) {
      double s = 0.0;
      std::size_t n = 0;
      for (int p = -kmax; p <= kmax; ++p)
        for (int q = -kmax; q <= kmax; ++q, n += 3)
          s += coef[n] * std::cos(2 * pi * (p * x + q * y) + pi * coef[n + 1]) * std::cos(2.0 * z + pi * coef[n + 2]);
      if (vanish) s *= std::sin(pi * z);
      return amp * s / (2 * pi * (2 * kmax + 1));
    });
  }
  return a;
}

}  // namespace detail

// trivial: v0 = 0, b0 = 0.
// steady_shear: v0 = 0, b0 = (field (1 + shear cos(pi x3)), 0, 0); an exact equilibrium.
// demo: potential wave of size amplitude plus the horizontal shear field; the
//   pressure of a potential flow is positive, so the Taylor sign holds.
// euler_wave: the demo velocity with b0 = 0.
// vortex_violating: v0 = 0 and a magnetic vortex b0 = amplitude curl(0, sin(2 pi x1) sin(pi x3), 0),
//   whose initial pressure has the wrong sign at the faces.
// random: random band-limited v0 and face-tangent b0 drawn from seed.
inline InitialData make_preset(const std::string& name, const GridSpec& g, const PresetParams& p = {}) {
  g.validate();
  const double pi = std::numbers::pi;
  if (name == "trivial") return {VectorField(g), VectorField(g)};
  if (name == "steady_shear") return {VectorField(g), detail::horizontal_shear(g, p.field, p.shear)};
  if (name == "demo") return {detail::potential_wave(g, p.amplitude), detail::horizontal_shear(g, p.field, p.shear)};
  if (name == "euler_wave") return {detail::potential_wave(g, p.amplitude), VectorField(g)};
  if (name == "vortex_violating") {
    VectorField a(g);
    a[1] = ScalarField::from_function(
        g, [&](double x, double, double z) { return p.amplitude * std::sin(2 * pi * x) * std::sin(pi * z); });
    return {VectorField(g), curl(a)};
  }
  if (name == "random") {
    std::mt19937_64 rng(p.seed);
    VectorField v0 = curl(detail::random_potential(g, p.amplitude, rng, false));
    VectorField b0 = curl(detail::random_potential(g, p.field, rng, true));
    return {std::move(v0), std::move(b0)};
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace mhdl
