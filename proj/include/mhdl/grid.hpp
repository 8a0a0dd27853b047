#pragma once

// Discretization core on the slab T^2 x (0,1): field storage, horizontal
// spectral calculus, vertical finite differences, and discrete Sobolev norms.
//
// Conventions: horizontal period 1 in both directions (wavenumbers 2*pi*k),
// node (i, j, k) sits at (i/n1, j/n2, k/n3), k = 0..n3 includes both faces.
// Storage is row-major with x1 fastest. Derivative symbols vanish on the
// Nyquist modes, so every horizontal derivative is a composition of first
// derivatives and mixed partials commute exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mhdl/fft.hpp"

namespace mhdl {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct GridSpec {
  int n1 = 16;
  int n2 = 16;
  int n3 = 16;
  int fd_order = 2;  // accuracy order of vertical stencils: 2 or 4

  void validate() const {
    if (n1 < 8 || n2 < 8 || n1 % 2 != 0 || n2 % 2 != 0)
      throw std::invalid_argument("GridSpec: n1, n2 must be even and >= 8");
    if (n3 < 8) throw std::invalid_argument("GridSpec: n3 must be >= 8");
    if (fd_order != 2 && fd_order != 4)
      throw std::invalid_argument("GridSpec: fd_order must be 2 or 4");
  }

  double h3() const noexcept { return 1.0 / n3; }
  int levels() const noexcept { return n3 + 1; }
  std::size_t plane() const noexcept { return std::size_t(n1) * n2; }
  std::size_t size() const noexcept { return plane() * levels(); }
  std::size_t index(int i, int j, int k) const noexcept {
    return std::size_t(i) + std::size_t(n1) * (std::size_t(j) + std::size_t(n2) * k);
  }
  double x1(int i) const noexcept { return double(i) / n1; }
  double x2(int j) const noexcept { return double(j) / n2; }
  double x3(int k) const noexcept { return double(k) / n3; }

  // Trapezoid weight of level k in x3.
  double weight3(int k) const noexcept { return (k == 0 || k == n3) ? 0.5 * h3() : h3(); }

  bool operator==(const GridSpec&) const = default;
};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double value = 0.0) : grid_(g), v_(g.size(), value) {}
  ScalarField(const GridSpec& g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) throw std::invalid_argument("ScalarField: size mismatch");
  }

  template <class F>
  static ScalarField from_function(const GridSpec& g, F&& f) {
    ScalarField out(g);
    for (int k = 0; k < g.levels(); ++k)
      for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) out.v_[g.index(i, j, k)] = f(g.x1(i), g.x2(j), g.x3(k));
    return out;
  }

  const GridSpec& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return v_.size(); }
  std::span<double> values() noexcept { return v_; }
  std::span<const double> values() const noexcept { return v_; }
  std::vector<double>& raw() noexcept { return v_; }
  const std::vector<double>& raw() const noexcept { return v_; }

  double& operator[](std::size_t n) noexcept { return v_[n]; }
  double operator[](std::size_t n) const noexcept { return v_[n]; }
  double& at(int i, int j, int k) noexcept { return v_[grid_.index(i, j, k)]; }
  double at(int i, int j, int k) const noexcept { return v_[grid_.index(i, j, k)]; }

  std::span<double> level(int k) noexcept {
    return std::span<double>(v_).subspan(std::size_t(k) * grid_.plane(), grid_.plane());
  }
  std::span<const double> level(int k) const noexcept {
    return std::span<const double>(v_).subspan(std::size_t(k) * grid_.plane(), grid_.plane());
  }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t n = 0; n < v_.size(); ++n) v_[n] += o.v_[n];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (std::size_t n = 0; n < v_.size(); ++n) v_[n] -= o.v_[n];
    return *this;
  }
  ScalarField& operator*=(double a) {
    for (auto& x : v_) x *= a;
    return *this;
  }
  // y += a*x
  ScalarField& axpy(double a, const ScalarField& x) {
    for (std::size_t n = 0; n < v_.size(); ++n) v_[n] += a * x.v_[n];
    return *this;
  }

  bool operator==(const ScalarField& o) const { return grid_ == o.grid_ && v_ == o.v_; }

 private:
  GridSpec grid_{};
  std::vector<double> v_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }
inline ScalarField operator-(ScalarField a) { return a *= -1.0; }

// Pointwise product.
inline ScalarField operator*(const ScalarField& a, const ScalarField& b) {
  ScalarField out(a.grid());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] * b[n];
  return out;
}

struct VectorField {
  std::array<ScalarField, 3> c;

  VectorField() = default;
  explicit VectorField(const GridSpec& g) : c{ScalarField(g), ScalarField(g), ScalarField(g)} {}
  VectorField(ScalarField a, ScalarField b, ScalarField d) : c{std::move(a), std::move(b), std::move(d)} {}

  const GridSpec& grid() const noexcept { return c[0].grid(); }
  ScalarField& operator[](int i) noexcept { return c[i]; }
  const ScalarField& operator[](int i) const noexcept { return c[i]; }

  VectorField& operator+=(const VectorField& o) {
    for (int i = 0; i < 3; ++i) c[i] += o.c[i];
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    for (int i = 0; i < 3; ++i) c[i] -= o.c[i];
    return *this;
  }
  VectorField& operator*=(double a) {
    for (auto& f : c) f *= a;
    return *this;
  }
  VectorField& axpy(double a, const VectorField& x) {
    for (int i = 0; i < 3; ++i) c[i].axpy(a, x.c[i]);
    return *this;
  }
  bool operator==(const VectorField&) const = default;
};

inline VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
inline VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
inline VectorField operator*(double s, VectorField a) { return a *= s; }

// 3x3 field of scalars, entry (i, j) stored at 3*i + j.
struct TensorField {
  std::array<ScalarField, 9> c;

  TensorField() = default;
  explicit TensorField(const GridSpec& g) {
    for (auto& f : c) f = ScalarField(g);
  }
  const GridSpec& grid() const noexcept { return c[0].grid(); }
  ScalarField& operator()(int i, int j) noexcept { return c[3 * i + j]; }
  const ScalarField& operator()(int i, int j) const noexcept { return c[3 * i + j]; }
  bool operator==(const TensorField&) const = default;
};

enum class Face : int { bottom = 0, top = 1 };

// Values on both faces of Gamma, `dim` components each. Layout: [face][comp][plane].
class BoundaryField {
 public:
  BoundaryField() = default;
  BoundaryField(const GridSpec& g, int dim, double value = 0.0)
      : grid_(g), dim_(dim), v_(2 * std::size_t(dim) * g.plane(), value) {}

  template <class F>
  static BoundaryField from_function(const GridSpec& g, F&& f) {  // f(face, x1, x2) -> double
    BoundaryField out(g, 1);
    for (int face = 0; face < 2; ++face) {
      auto s = out.at(Face(face), 0);
      for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) s[i + std::size_t(g.n1) * j] = f(Face(face), g.x1(i), g.x2(j));
    }
    return out;
  }

  const GridSpec& grid() const noexcept { return grid_; }
  int dim() const noexcept { return dim_; }
  std::span<double> values() noexcept { return v_; }
  std::span<const double> values() const noexcept { return v_; }

  std::span<double> at(Face f, int comp) noexcept {
    return std::span<double>(v_).subspan((std::size_t(f) * dim_ + comp) * grid_.plane(), grid_.plane());
  }
  std::span<const double> at(Face f, int comp) const noexcept {
    return std::span<const double>(v_).subspan((std::size_t(f) * dim_ + comp) * grid_.plane(),
                                               grid_.plane());
  }

  BoundaryField component(int comp) const {
    BoundaryField out(grid_, 1);
    for (int f = 0; f < 2; ++f) std::ranges::copy(at(Face(f), comp), out.at(Face(f), 0).begin());
    return out;
  }
  void set_component(int comp, const BoundaryField& s) {
    for (int f = 0; f < 2; ++f) std::ranges::copy(s.at(Face(f), 0), at(Face(f), comp).begin());
  }

  BoundaryField& operator+=(const BoundaryField& o) {
    for (std::size_t n = 0; n < v_.size(); ++n) v_[n] += o.v_[n];
    return *this;
  }
  BoundaryField& operator-=(const BoundaryField& o) {
    for (std::size_t n = 0; n < v_.size(); ++n) v_[n] -= o.v_[n];
    return *this;
  }
  BoundaryField& operator*=(double a) {
    for (auto& x : v_) x *= a;
    return *this;
  }
  bool operator==(const BoundaryField&) const = default;

 private:
  GridSpec grid_{};
  int dim_ = 1;
  std::vector<double> v_;
};

inline BoundaryField operator+(BoundaryField a, const BoundaryField& b) { return a += b; }
inline BoundaryField operator-(BoundaryField a, const BoundaryField& b) { return a -= b; }
inline BoundaryField operator*(double s, BoundaryField a) { return a *= s; }
inline BoundaryField operator*(const BoundaryField& a, const BoundaryField& b) {
  BoundaryField out(a.grid(), a.dim());
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = x[n] * y[n];
  return out;
}

// ---------------------------------------------------------------------------
// Horizontal spectral machinery

namespace detail {

// Signed integer wavenumbers of half-spectrum index (m1, m2).
inline int wave1(int m1) noexcept { return m1; }
inline int wave2(int m2, int n2) noexcept { return m2 <= n2 / 2 ? m2 : m2 - n2; }

// i*2*pi*k with the Nyquist mode removed.
inline std::complex<double> deriv_symbol(int k, int n) noexcept {
  if (2 * std::abs(k) == n) return {0.0, 0.0};
  return {0.0, two_pi * k};
}

// Multiplicity of a half-spectrum column in the full spectrum.
inline double half_weight(int m1, int n1) noexcept { return (m1 == 0 || 2 * m1 == n1) ? 1.0 : 2.0; }

// Applies symbol(k1, k2) to `howmany` contiguous planes.
template <class Symbol>
void apply_planes(int n1, int n2, int howmany, std::span<const double> in, std::span<double> out,
                  Symbol&& symbol) {
  auto& tr = plane_transform(n1, n2, howmany);
  std::vector<std::complex<double>> spec(tr.complex_size());
  tr.forward(in, spec);
  const int nc1 = n1 / 2 + 1;
  for (int p = 0; p < howmany; ++p)
    for (int m2 = 0; m2 < n2; ++m2)
      for (int m1 = 0; m1 < nc1; ++m1) {
        auto& z = spec[std::size_t(m1) + std::size_t(nc1) * (m2 + std::size_t(n2) * p)];
        z *= symbol(wave1(m1), wave2(m2, n2));
      }
  tr.backward(spec, out);
}

}  // namespace detail

// Half-spectrum of every level of a scalar field (unnormalized FFTW output).
struct HorizontalSpectrum {
  int n1 = 0, n2 = 0, planes = 0;
  std::vector<std::complex<double>> data;

  int nc1() const noexcept { return n1 / 2 + 1; }
  std::complex<double>& operator()(int m1, int m2, int p) noexcept {
    return data[std::size_t(m1) + std::size_t(nc1()) * (m2 + std::size_t(n2) * p)];
  }
  std::complex<double> operator()(int m1, int m2, int p) const noexcept {
    return data[std::size_t(m1) + std::size_t(nc1()) * (m2 + std::size_t(n2) * p)];
  }
};

inline HorizontalSpectrum horizontal_spectrum(const ScalarField& f) {
  const auto& g = f.grid();
  auto& tr = detail::plane_transform(g.n1, g.n2, g.levels());
  HorizontalSpectrum s{g.n1, g.n2, g.levels(), std::vector<std::complex<double>>(tr.complex_size())};
  tr.forward(f.values(), s.data);
  return s;
}

inline ScalarField from_horizontal_spectrum(const GridSpec& g, const HorizontalSpectrum& s) {
  ScalarField out(g);
  detail::plane_transform(g.n1, g.n2, g.levels()).backward(s.data, out.values());
  return out;
}

template <class Symbol>
ScalarField apply_horizontal_symbol(const ScalarField& f, Symbol&& symbol) {
  const auto& g = f.grid();
  ScalarField out(g);
  detail::apply_planes(g.n1, g.n2, g.levels(), f.values(), out.values(), symbol);
  return out;
}

template <class Symbol>
BoundaryField apply_horizontal_symbol(const BoundaryField& f, Symbol&& symbol) {
  const auto& g = f.grid();
  BoundaryField out(g, f.dim());
  detail::apply_planes(g.n1, g.n2, 2 * f.dim(), f.values(), out.values(), symbol);
  return out;
}

// Exact spectral derivative along x1 (axis 1) or x2 (axis 2).
inline ScalarField tangential_derivative(const ScalarField& f, int axis) {
  const auto& g = f.grid();
  if (axis == 1) return apply_horizontal_symbol(f, [&](int k1, int) { return detail::deriv_symbol(k1, g.n1); });
  if (axis == 2) return apply_horizontal_symbol(f, [&](int, int k2) { return detail::deriv_symbol(k2, g.n2); });
  throw std::invalid_argument("tangential_derivative: axis must be 1 or 2");
}

inline BoundaryField tangential_derivative(const BoundaryField& f, int axis) {
  const auto& g = f.grid();
  if (axis == 1) return apply_horizontal_symbol(f, [&](int k1, int) { return detail::deriv_symbol(k1, g.n1); });
  if (axis == 2) return apply_horizontal_symbol(f, [&](int, int k2) { return detail::deriv_symbol(k2, g.n2); });
  throw std::invalid_argument("tangential_derivative: axis must be 1 or 2");
}

// d1^a d2^b in one pass.
inline ScalarField tangential_derivative(const ScalarField& f, int a, int b) {
  const auto& g = f.grid();
  return apply_horizontal_symbol(f, [&](int k1, int k2) {
    return std::pow(detail::deriv_symbol(k1, g.n1), a) * std::pow(detail::deriv_symbol(k2, g.n2), b);
  });
}

inline BoundaryField tangential_derivative(const BoundaryField& f, int a, int b) {
  const auto& g = f.grid();
  return apply_horizontal_symbol(f, [&](int k1, int k2) {
    return std::pow(detail::deriv_symbol(k1, g.n1), a) * std::pow(detail::deriv_symbol(k2, g.n2), b);
  });
}

// Both tangential derivatives sharing one forward transform.
inline std::pair<ScalarField, ScalarField> tangential_gradient(const ScalarField& f) {
  const auto& g = f.grid();
  auto& tr = detail::plane_transform(g.n1, g.n2, g.levels());
  std::vector<std::complex<double>> spec(tr.complex_size()), work(tr.complex_size());
  tr.forward(f.values(), spec);
  const int nc1 = g.n1 / 2 + 1;
  ScalarField d1(g), d2(g);
  for (int axis = 1; axis <= 2; ++axis) {
    for (int p = 0; p < g.levels(); ++p)
      for (int m2 = 0; m2 < g.n2; ++m2)
        for (int m1 = 0; m1 < nc1; ++m1) {
          const std::size_t n = std::size_t(m1) + std::size_t(nc1) * (m2 + std::size_t(g.n2) * p);
          const auto sym = axis == 1 ? detail::deriv_symbol(m1, g.n1)
                                     : detail::deriv_symbol(detail::wave2(m2, g.n2), g.n2);
          work[n] = spec[n] * sym;
        }
    tr.backward(work, (axis == 1 ? d1 : d2).values());
  }
  return {std::move(d1), std::move(d2)};
}

// 2/3-rule truncation of horizontal modes.
inline ScalarField dealias(const ScalarField& f) {
  const auto& g = f.grid();
  return apply_horizontal_symbol(f, [&](int k1, int k2) {
    const bool keep = 3 * std::abs(k1) <= g.n1 && 3 * std::abs(k2) <= g.n2;
    return std::complex<double>(keep ? 1.0 : 0.0, 0.0);
  });
}

inline VectorField dealias(const VectorField& v) { return {dealias(v[0]), dealias(v[1]), dealias(v[2])}; }

// ---------------------------------------------------------------------------
// Vertical finite differences

// Banded operator along x3: row k reads `coeffs` starting at level `start`.
struct VerticalStencil {
  struct Row {
    int start = 0;
    std::vector<double> coeffs;
  };
  std::vector<Row> rows;

  // Dense (n3+1)^2 representation, row-major.
  std::vector<double> dense() const {
    const std::size_t n = rows.size();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < rows[r].coeffs.size(); ++c) m[r * n + rows[r].start + c] = rows[r].coeffs[c];
    return m;
  }
};

namespace detail {

inline VerticalStencil build_stencil(int n3, int order, int deriv) {
  const double h = 1.0 / n3;
  VerticalStencil s;
  s.rows.resize(n3 + 1);
  auto set = [&](int k, int start, std::vector<double> c, double scale) {
    for (auto& x : c) x *= scale;
    s.rows[k] = {start, std::move(c)};
  };
  // Mirror a bottom-boundary row to the top face; odd derivatives flip sign.
  auto mirror = [&](int k, const std::vector<double>& c, double scale) {
    std::vector<double> r(c.rbegin(), c.rend());
    const double sign = (deriv % 2 == 1) ? -1.0 : 1.0;
    set(n3 - k, n3 - k - int(c.size()) + 1 + k, r, sign * scale);
  };
  if (deriv == 1 && order == 2) {
    const double sc = 1.0 / (2 * h);
    for (int k = 1; k < n3; ++k) set(k, k - 1, {-1.0, 0.0, 1.0}, sc);
    set(0, 0, {-3.0, 4.0, -1.0}, sc);
    mirror(0, {-3.0, 4.0, -1.0}, sc);
  } else if (deriv == 1 && order == 4) {
    const double sc = 1.0 / (12 * h);
    for (int k = 2; k < n3 - 1; ++k) set(k, k - 2, {1.0, -8.0, 0.0, 8.0, -1.0}, sc);
    const std::vector<double> b0{-25.0, 48.0, -36.0, 16.0, -3.0};
    const std::vector<double> b1{-3.0, -10.0, 18.0, -6.0, 1.0};
    set(0, 0, b0, sc);
    set(1, 0, b1, sc);
    mirror(0, b0, sc);
    mirror(1, b1, sc);
  } else if (deriv == 2 && order == 2) {
    const double sc = 1.0 / (h * h);
    for (int k = 1; k < n3; ++k) set(k, k - 1, {1.0, -2.0, 1.0}, sc);
    set(0, 0, {2.0, -5.0, 4.0, -1.0}, sc);
    mirror(0, {2.0, -5.0, 4.0, -1.0}, sc);
  } else if (deriv == 2 && order == 4) {
    const double sc = 1.0 / (12 * h * h);
    for (int k = 2; k < n3 - 1; ++k) set(k, k - 2, {-1.0, 16.0, -30.0, 16.0, -1.0}, sc);
    const std::vector<double> b0{45.0, -154.0, 214.0, -156.0, 61.0, -10.0};
    const std::vector<double> b1{10.0, -15.0, -4.0, 14.0, -6.0, 1.0};
    set(0, 0, b0, sc);
    set(1, 0, b1, sc);
    mirror(0, b0, sc);
    mirror(1, b1, sc);
  } else {
    throw std::invalid_argument("vertical stencil: unsupported (order, derivative)");
  }
  return s;
}

}  // namespace detail

inline const VerticalStencil& vertical_stencil(int n3, int order, int deriv) {
  thread_local std::map<std::tuple<int, int, int>, VerticalStencil> cache;
  auto key = std::make_tuple(n3, order, deriv);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, detail::build_stencil(n3, order, deriv)).first;
  return it->second;
}

inline ScalarField apply_vertical(const ScalarField& f, const VerticalStencil& st) {
  const auto& g = f.grid();
  ScalarField out(g);
  const std::size_t P = g.plane();
  const double* in = f.values().data();
  double* o = out.values().data();
  for (int k = 0; k < g.levels(); ++k) {
    const auto& row = st.rows[k];
    double* dst = o + k * P;
    for (std::size_t c = 0; c < row.coeffs.size(); ++c) {
      const double w = row.coeffs[c];
      const double* src = in + (row.start + c) * P;
      for (std::size_t n = 0; n < P; ++n) dst[n] += w * src[n];
    }
  }
  return out;
}

// d/dx3 (deriv = 1) or d^2/dx3^2 (deriv = 2) with the grid's accuracy order.
inline ScalarField vertical_derivative(const ScalarField& f, int deriv = 1) {
  if (deriv != 1 && deriv != 2) throw std::invalid_argument("vertical_derivative: deriv must be 1 or 2");
  const auto& g = f.grid();
  return apply_vertical(f, vertical_stencil(g.n3, g.fd_order, deriv));
}

// Derivative along axis 1, 2 (spectral) or 3 (finite differences).
inline ScalarField partial(const ScalarField& f, int axis) {
  if (axis == 3) return vertical_derivative(f, 1);
  return tangential_derivative(f, axis);
}

inline VectorField gradient(const ScalarField& f) {
  auto [d1, d2] = tangential_gradient(f);
  return {std::move(d1), std::move(d2), vertical_derivative(f, 1)};
}

// (grad u)_{ij} = d_j u_i.
inline TensorField jacobian(const VectorField& u) {
  TensorField out(u.grid());
  for (int i = 0; i < 3; ++i) {
    auto d = gradient(u[i]);
    for (int j = 0; j < 3; ++j) out(i, j) = std::move(d[j]);
  }
  return out;
}

inline ScalarField divergence(const VectorField& u) {
  return tangential_derivative(u[0], 1) + tangential_derivative(u[1], 2) + vertical_derivative(u[2], 1);
}

inline VectorField curl(const VectorField& u) {
  auto d1 = [&](int i) { return tangential_derivative(u[i], 1); };
  auto d2 = [&](int i) { return tangential_derivative(u[i], 2); };
  auto d3 = [&](int i) { return vertical_derivative(u[i], 1); };
  return {d2(2) - d3(1), d3(0) - d1(2), d1(1) - d2(0)};
}

// ---------------------------------------------------------------------------
// Traces and surface calculus

inline BoundaryField trace(const ScalarField& f) {
  const auto& g = f.grid();
  BoundaryField out(g, 1);
  std::ranges::copy(f.level(0), out.at(Face::bottom, 0).begin());
  std::ranges::copy(f.level(g.n3), out.at(Face::top, 0).begin());
  return out;
}

inline BoundaryField trace(const VectorField& u) {
  const auto& g = u.grid();
  BoundaryField out(g, 3);
  for (int i = 0; i < 3; ++i) {
    std::ranges::copy(u[i].level(0), out.at(Face::bottom, i).begin());
    std::ranges::copy(u[i].level(g.n3), out.at(Face::top, i).begin());
  }
  return out;
}

// Surface Laplacian d1^2 + d2^2 per face and component.
inline BoundaryField surface_laplacian(const BoundaryField& g) {
  const auto& gr = g.grid();
  return apply_horizontal_symbol(g, [&](int k1, int k2) {
    const auto a = detail::deriv_symbol(k1, gr.n1);
    const auto b = detail::deriv_symbol(k2, gr.n2);
    return a * a + b * b;
  });
}

// u with surface_laplacian(u) = g - mean(g) and zero mean; modes with a vanishing
// symbol (the mean and the Nyquist-only modes) are set to zero.
inline BoundaryField inverse_surface_laplacian(const BoundaryField& g) {
  const auto& gr = g.grid();
  return apply_horizontal_symbol(g, [&](int k1, int k2) {
    const auto a = detail::deriv_symbol(k1, gr.n1);
    const auto b = detail::deriv_symbol(k2, gr.n2);
    const auto s = a * a + b * b;
    return std::abs(s) == 0.0 ? std::complex<double>(0.0, 0.0) : 1.0 / s;
  });
}

// f - mean over T^2, per face and component.
inline BoundaryField remove_mean(const BoundaryField& g) {
  return apply_horizontal_symbol(g, [](int k1, int k2) {
    return std::complex<double>((k1 == 0 && k2 == 0) ? 0.0 : 1.0, 0.0);
  });
}

// ---------------------------------------------------------------------------
// Norms

// Trapezoid-in-x3, exact-mean-in-(x1,x2) quadrature of f*g.
inline double inner(const ScalarField& f, const ScalarField& g) {
  const auto& gr = f.grid();
  const std::size_t P = gr.plane();
  double total = 0.0;
  for (int k = 0; k < gr.levels(); ++k) {
    auto a = f.level(k);
    auto b = g.level(k);
    double s = 0.0;
    for (std::size_t n = 0; n < P; ++n) s += a[n] * b[n];
    total += gr.weight3(k) * s / double(P);
  }
  return total;
}

inline double l2_norm(const ScalarField& f) { return std::sqrt(inner(f, f)); }
inline double l2_norm(const VectorField& u) {
  return std::sqrt(inner(u[0], u[0]) + inner(u[1], u[1]) + inner(u[2], u[2]));
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}
inline double max_abs(const ScalarField& f) { return max_abs(f.values()); }
inline double max_abs(const VectorField& u) {
  return std::max({max_abs(u[0]), max_abs(u[1]), max_abs(u[2])});
}
inline double max_abs(const TensorField& t) {
  double m = 0.0;
  for (const auto& f : t.c) m = std::max(m, max_abs(f));
  return m;
}

inline bool all_finite(std::span<const double> v) {
  return std::ranges::all_of(v, [](double x) { return std::isfinite(x); });
}

namespace detail {

// Sum over |alpha| <= s of ||D^alpha f||^2, horizontal spectral and vertical FD.
inline double volume_seminorm_sum(const ScalarField& f, int s) {
  const auto& g = f.grid();
  const auto& d3 = vertical_stencil(g.n3, g.fd_order, 1);
  double total = 0.0;
  for (int a = 0; a <= s; ++a)
    for (int b = 0; a + b <= s; ++b) {
      ScalarField h = (a == 0 && b == 0) ? f : tangential_derivative(f, a, b);
      for (int c = 0; a + b + c <= s; ++c) {
        total += inner(h, h);
        if (a + b + c < s) h = apply_vertical(h, d3);
      }
    }
  return total;
}

inline void check_volume_index(int s) {
  if (s < 0 || s > 4) throw std::out_of_range("volume_norm: s must be an integer in 0..4");
}

}  // namespace detail

// Discrete H^s norm on the slab, s in 0..4.
inline double volume_norm(const ScalarField& f, int s) {
  detail::check_volume_index(s);
  return std::sqrt(detail::volume_seminorm_sum(f, s));
}

inline double volume_norm(const VectorField& u, int s) {
  detail::check_volume_index(s);
  double t = 0.0;
  for (int i = 0; i < 3; ++i) t += detail::volume_seminorm_sum(u[i], s);
  return std::sqrt(t);
}

inline double volume_norm(const TensorField& t, int s) {
  detail::check_volume_index(s);
  double acc = 0.0;
  for (const auto& f : t.c) acc += detail::volume_seminorm_sum(f, s);
  return std::sqrt(acc);
}

// Spectral H^s norm on Gamma, summed over both faces and all components:
// |g|_s^2 = sum_k (1 + |2 pi k|^2)^s |g_k|^2 with normalized Fourier coefficients.
// Accepted s: -1/2, 0, 1/2, ..., 7/2.
inline double boundary_norm(const BoundaryField& g, double s) {
  const double twice = 2.0 * s;
  if (twice != std::round(twice) || twice < -1.0 || twice > 7.0)
    throw std::out_of_range("boundary_norm: s must be a half-integer in [-1/2, 7/2]");
  const auto& gr = g.grid();
  const int planes = 2 * g.dim();
  auto& tr = detail::plane_transform(gr.n1, gr.n2, planes);
  std::vector<std::complex<double>> spec(tr.complex_size());
  tr.forward(g.values(), spec);
  const int nc1 = gr.n1 / 2 + 1;
  const double norm = 1.0 / (double(gr.n1) * gr.n2);
  double total = 0.0;
  for (int p = 0; p < planes; ++p)
    for (int m2 = 0; m2 < gr.n2; ++m2)
      for (int m1 = 0; m1 < nc1; ++m1) {
        const int k1 = m1;
        const int k2 = detail::wave2(m2, gr.n2);
        const double kk = two_pi * two_pi * (double(k1) * k1 + double(k2) * k2);
        const auto z = spec[std::size_t(m1) + std::size_t(nc1) * (m2 + std::size_t(gr.n2) * p)] * norm;
        total += detail::half_weight(m1, gr.n1) * std::pow(1.0 + kk, s) * std::norm(z);
      }
  return std::sqrt(total);
}

inline double boundary_l2(const BoundaryField& g) {
  double t = 0.0;
  for (double x : g.values()) t += x * x;
  return std::sqrt(t / double(g.grid().plane()));
}

inline double boundary_max(const BoundaryField& g) { return max_abs(g.values()); }

// Modal energy sum: trapezoid in x3 of sum_k |f_k|^2 per level (Parseval partner of l2).
inline double modal_energy(const ScalarField& f) {
  const auto& g = f.grid();
  auto s = horizontal_spectrum(f);
  const double norm = 1.0 / (double(g.n1) * g.n2);
  double total = 0.0;
  for (int p = 0; p < g.levels(); ++p) {
    double lev = 0.0;
    for (int m2 = 0; m2 < g.n2; ++m2)
      for (int m1 = 0; m1 < s.nc1(); ++m1) lev += detail::half_weight(m1, g.n1) * std::norm(s(m1, m2, p) * norm);
    total += g.weight3(p) * lev;
  }
  return total;
}

}  // namespace mhdl
