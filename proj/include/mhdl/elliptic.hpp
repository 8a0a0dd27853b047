#pragma once

// Dirichlet elliptic solvers on the slab.
//
// FlatPoisson diagonalizes the horizontal part with FFTs and factors one small
// dense vertical system per distinct horizontal symbol. Three vertical closures
// are available: the grid's second-derivative stencil, the composition D3*D3 of
// first-derivative stencils, and the compact three-point staggered stencil.
// The variable-coefficient solvers reuse it as a preconditioner.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "mhdl/errors.hpp"
#include "mhdl/geometry.hpp"
#include "mhdl/grid.hpp"

namespace mhdl {

enum class VerticalClosure { stencil, composed, staggered };

struct SolverConfig {
  double tol = 1e-10;
  int max_iter = 500;
  int restart = 60;  // GMRES only
};

struct SolveInfo {
  int iterations = 0;
  double residual = 0.0;
};

class FlatPoisson {
 public:
  FlatPoisson(const GridSpec& g, VerticalClosure closure) : g_(g) {
    g.validate();
    const int L = g.levels();
    Lz_ = Eigen::MatrixXd::Zero(L, L);
    if (closure == VerticalClosure::stencil) {
      const auto m = vertical_stencil(g.n3, g.fd_order, 2).dense();
      for (int r = 0; r < L; ++r)
        for (int c = 0; c < L; ++c) Lz_(r, c) = m[std::size_t(r) * L + c];
    } else if (closure == VerticalClosure::composed) {
      const auto m = vertical_stencil(g.n3, g.fd_order, 1).dense();
      Eigen::MatrixXd D(L, L);
      for (int r = 0; r < L; ++r)
        for (int c = 0; c < L; ++c) D(r, c) = m[std::size_t(r) * L + c];
      Lz_ = D * D;
    } else {
      const double ih2 = 1.0 / (g.h3() * g.h3());
      for (int k = 1; k < g.n3; ++k) {
        Lz_(k, k - 1) = ih2;
        Lz_(k, k) = -2.0 * ih2;
        Lz_(k, k + 1) = ih2;
      }
    }
    for (int r = 0; r < L; ++r)
      for (int c = 0; c < L; ++c)
        if (Lz_(r, c) != 0.0) bands_.push_back({r, c, Lz_(r, c)});

    // Group horizontal modes by the integer |k|^2 of their (Nyquist-free) symbol.
    const int nc1 = g.n1 / 2 + 1;
    std::map<long, std::size_t> slot;
    for (int m2 = 0; m2 < g.n2; ++m2)
      for (int m1 = 0; m1 < nc1; ++m1) {
        const long K = symbol_index(m1, m2);
        auto it = slot.find(K);
        if (it == slot.end()) {
          it = slot.emplace(K, groups_.size()).first;
          groups_.push_back({K, {}, {}});
        }
        groups_[it->second].modes.push_back(std::size_t(m1) + std::size_t(nc1) * m2);
      }
    const int ni = g.n3 - 1;
    const Eigen::MatrixXd Li = Lz_.block(1, 1, ni, ni);
    for (auto& grp : groups_) {
      const double s = two_pi * two_pi * double(grp.K);
      Eigen::MatrixXd M = s * Eigen::MatrixXd::Identity(ni, ni) - Li;
      grp.lu.compute(M);
    }
  }

  const GridSpec& grid() const noexcept { return g_; }
  const Eigen::MatrixXd& vertical() const noexcept { return Lz_; }

  // -(D1 D1 + D2 D2) u - Lz u on interior levels, zero on the faces.
  ScalarField apply(const ScalarField& u) const {
    ScalarField out = apply_horizontal_symbol(u, [&](int k1, int k2) {
      return std::complex<double>(two_pi * two_pi * double(eff(k1, g_.n1) + eff(k2, g_.n2)), 0.0);
    });
    const std::size_t P = g_.plane();
    const double* src = u.values().data();
    double* dst = out.values().data();
    for (const auto& b : bands_) {
      if (b.r == 0 || b.r == g_.n3) continue;
      for (std::size_t n = 0; n < P; ++n) dst[b.r * P + n] -= b.w * src[b.c * P + n];
    }
    std::fill_n(dst, P, 0.0);
    std::fill_n(dst + g_.n3 * P, P, 0.0);
    return out;
  }

  // u with apply(u) = rhs on interior levels and u = dirichlet on the faces.
  ScalarField solve(const ScalarField& rhs, const BoundaryField& dirichlet) const {
    auto& tr = detail::plane_transform(g_.n1, g_.n2, g_.levels());
    auto& trb = detail::plane_transform(g_.n1, g_.n2, 2);
    std::vector<std::complex<double>> spec(tr.complex_size());
    std::vector<std::complex<double>> bspec(trb.complex_size());
    tr.forward(rhs.values(), spec);
    trb.forward(dirichlet.values().subspan(0, 2 * g_.plane()), bspec);
    const std::size_t stride = std::size_t(g_.n1 / 2 + 1) * g_.n2;
    const int ni = g_.n3 - 1;
    Eigen::MatrixXd B;
    for (const auto& grp : groups_) {
      const auto cnt = grp.modes.size();
      B.resize(ni, 2 * Eigen::Index(cnt));
      for (std::size_t c = 0; c < cnt; ++c) {
        const std::size_t q = grp.modes[c];
        const auto u0 = bspec[q];
        const auto u1 = bspec[stride + q];
        for (int k = 1; k <= ni; ++k) {
          const auto r = spec[std::size_t(k) * stride + q] + Lz_(k, 0) * u0 + Lz_(k, g_.n3) * u1;
          B(k - 1, 2 * c) = r.real();
          B(k - 1, 2 * c + 1) = r.imag();
        }
      }
      const Eigen::MatrixXd X = grp.lu.solve(B);
      for (std::size_t c = 0; c < cnt; ++c) {
        const std::size_t q = grp.modes[c];
        for (int k = 1; k <= ni; ++k) spec[std::size_t(k) * stride + q] = {X(k - 1, 2 * c), X(k - 1, 2 * c + 1)};
        spec[q] = bspec[q];
        spec[std::size_t(g_.n3) * stride + q] = bspec[stride + q];
      }
    }
    ScalarField out(g_);
    tr.backward(spec, out.values());
    std::ranges::copy(dirichlet.at(Face::bottom, 0), out.level(0).begin());
    std::ranges::copy(dirichlet.at(Face::top, 0), out.level(g_.n3).begin());
    return out;
  }

  // Zero Dirichlet data; face values of rhs are ignored.
  ScalarField solve_homogeneous(const ScalarField& rhs) const { return solve(rhs, BoundaryField(g_, 1)); }

 private:
  struct Band {
    int r, c;
    double w;
  };
  struct Group {
    long K;
    std::vector<std::size_t> modes;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  };

  static long eff(int k, int n) noexcept { return 2 * std::abs(k) == n ? 0 : long(k) * k; }
  long symbol_index(int m1, int m2) const noexcept {
    return eff(detail::wave1(m1), g_.n1) + eff(detail::wave2(m2, g_.n2), g_.n2);
  }

  GridSpec g_;
  Eigen::MatrixXd Lz_;
  std::vector<Band> bands_;
  std::vector<Group> groups_;
};

// Shared immutable solver per (grid, closure).
inline const FlatPoisson& flat_poisson(const GridSpec& g, VerticalClosure closure) {
  static std::mutex mtx;
  static std::map<std::tuple<int, int, int, int, int>, std::unique_ptr<FlatPoisson>> cache;
  const auto key = std::make_tuple(g.n1, g.n2, g.n3, g.fd_order, int(closure));
  std::lock_guard lock(mtx);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<FlatPoisson>(g, closure)).first;
  return *it->second;
}

// -Delta u = rhs in the interior, u = dirichlet on Gamma.
inline ScalarField solve_flat_poisson(const ScalarField& rhs, const BoundaryField& dirichlet) {
  return flat_poisson(rhs.grid(), VerticalClosure::stencil).solve(rhs, dirichlet);
}

inline ScalarField harmonic_extension(const BoundaryField& g) {
  const auto& gr = g.grid();
  return flat_poisson(gr, VerticalClosure::stencil).solve(ScalarField(gr), g.component(0));
}

inline VectorField harmonic_extension_vector(const BoundaryField& g) {
  const auto& gr = g.grid();
  const auto& fp = flat_poisson(gr, VerticalClosure::stencil);
  VectorField out(gr);
  for (int i = 0; i < 3; ++i) out[i] = fp.solve(ScalarField(gr), g.component(i));
  return out;
}

// ---------------------------------------------------------------------------
// Shared Krylov plumbing on interior unknowns (face levels held at zero).

namespace detail {

inline void zero_faces(ScalarField& f) {
  const auto& g = f.grid();
  std::ranges::fill(f.level(0), 0.0);
  std::ranges::fill(f.level(g.n3), 0.0);
}

inline double dot(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

inline double norm(const ScalarField& a) { return std::sqrt(dot(a, a)); }

// Field equal to `dirichlet` on the faces and zero inside.
inline ScalarField lift(const GridSpec& g, const BoundaryField& dirichlet) {
  ScalarField out(g);
  std::ranges::copy(dirichlet.at(Face::bottom, 0), out.level(0).begin());
  std::ranges::copy(dirichlet.at(Face::top, 0), out.level(g.n3).begin());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Flux-form operator -Div(E grad q)

struct EllipticProblem {
  TensorField E;
  ScalarField rhs;
  BoundaryField dirichlet;

  EllipticProblem(TensorField e, ScalarField r, BoundaryField d, double e_min = 0.1)
      : E(std::move(e)), rhs(std::move(r)), dirichlet(std::move(d)) {
    const auto& g = E.grid();
    double worst = INFINITY;
    for (std::size_t n = 0; n < g.size(); ++n) {
      Eigen::Matrix3d m;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = E(i, j)[n];
      const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("EllipticProblem: E is not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(m, Eigen::EigenvaluesOnly);
      worst = std::min(worst, es.eigenvalues()(0));
    }
    if (!(worst >= e_min))
      throw std::invalid_argument("EllipticProblem: smallest eigenvalue of E is " + std::to_string(worst));
  }
};

// Interior rows of the flux-form operator; face rows are zero.
// Horizontal-horizontal and cross terms are node based, the vertical-vertical
// term uses face-averaged coefficients on half levels, and the cross term in
// the x3 row is the weighted transpose of the node difference, so the matrix
// is symmetric on interior unknowns.
inline ScalarField apply_flux_operator(const TensorField& E, const ScalarField& q) {
  const auto& g = q.grid();
  const std::size_t P = g.plane();
  auto [d1, d2] = tangential_gradient(q);
  const auto& D = vertical_stencil(g.n3, 2, 1);
  ScalarField dz = apply_vertical(q, D);

  ScalarField f1(g), f2(g), g3(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    f1[n] = E(0, 0)[n] * d1[n] + E(0, 1)[n] * d2[n] + E(0, 2)[n] * dz[n];
    f2[n] = E(1, 0)[n] * d1[n] + E(1, 1)[n] * d2[n] + E(1, 2)[n] * dz[n];
    g3[n] = E(2, 0)[n] * d1[n] + E(2, 1)[n] * d2[n];
  }
  ScalarField out = tangential_derivative(f1, 1) + tangential_derivative(f2, 2);
  out *= -1.0;

  // Weighted transpose of D applied to g3.
  for (int m = 0; m < g.levels(); ++m) {
    const auto& row = D.rows[m];
    const double wm = g.weight3(m);
    for (std::size_t c = 0; c < row.coeffs.size(); ++c) {
      const int col = row.start + int(c);
      const double w = row.coeffs[c] * wm / g.weight3(col);
      double* o = out.values().data() + col * P;
      const double* s = g3.values().data() + m * P;
      for (std::size_t n = 0; n < P; ++n) o[n] += w * s[n];
    }
  }

  const double ih2 = 1.0 / (g.h3() * g.h3());
  const auto& e33 = E(2, 2);
  for (int k = 1; k < g.n3; ++k)
    for (std::size_t n = 0; n < P; ++n) {
      const std::size_t c = k * P + n, dn = c - P, up = c + P;
      const double em = 0.5 * (e33[c] + e33[dn]);
      const double ep = 0.5 * (e33[c] + e33[up]);
      out[c] += ih2 * (em * (q[c] - q[dn]) - ep * (q[up] - q[c]));
    }
  detail::zero_faces(out);
  return out;
}

struct EllipticSolution {
  ScalarField q;
  SolveInfo info;
};

// Preconditioned CG on -Div(E grad q) = rhs, q = dirichlet on Gamma.
inline EllipticSolution solve_variable(const EllipticProblem& prob, const SolverConfig& cfg = {}) {
  if (!(cfg.tol > 0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  const auto& g = prob.rhs.grid();
  const auto& pre = flat_poisson(g, VerticalClosure::staggered);
  ScalarField x0 = detail::lift(g, prob.dirichlet);
  ScalarField b = prob.rhs;
  detail::zero_faces(b);
  b -= apply_flux_operator(prob.E, x0);
  const double bn = detail::norm(b);
  EllipticSolution out{x0, {0, 0.0}};
  if (bn == 0.0) return out;

  ScalarField x(g), r = b;
  ScalarField z = pre.solve_homogeneous(r);
  ScalarField p = z;
  double rz = detail::dot(r, z);
  double rel = 1.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    ScalarField Ap = apply_flux_operator(prob.E, p);
    const double alpha = rz / detail::dot(p, Ap);
    x.axpy(alpha, p);
    r.axpy(-alpha, Ap);
    rel = detail::norm(r) / bn;
    if (!std::isfinite(rel)) break;
    if (rel <= cfg.tol) {
      out.q += x;
      out.info = {it, rel};
      return out;
    }
    z = pre.solve_homogeneous(r);
    const double rz_new = detail::dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    p *= beta;
    p += z;
  }
  throw NoConvergence(std::size_t(cfg.max_iter), rel);
}

inline EllipticSolution solve_variable(const TensorField& E, const ScalarField& rhs, const BoundaryField& dirichlet,
                                       const SolverConfig& cfg = {}) {
  return solve_variable(EllipticProblem(E, rhs, dirichlet), cfg);
}

// E = J A^T A
inline TensorField pressure_matrix(const CofactorData& cof) {
  const auto& g = cof.J.grid();
  TensorField E(g);
  for (int j = 0; j < 3; ++j)
    for (int k = j; k < 3; ++k) {
      ScalarField s(g);
      for (int i = 0; i < 3; ++i)
        for (std::size_t n = 0; n < g.size(); ++n) s[n] += cof.A(i, j)[n] * cof.A(i, k)[n];
      for (std::size_t n = 0; n < g.size(); ++n) s[n] *= cof.J[n];
      E(j, k) = s;
      if (k != j) E(k, j) = s;
    }
  return E;
}

// ---------------------------------------------------------------------------
// Compatible (non-divergence) form -A_ij D_j (A_ik D_k q), the exact discrete
// partner of div_A applied to grad_A.

inline ScalarField apply_compatible_operator(const CofactorData& cof, const ScalarField& q) {
  VectorField w = grad_A(q, cof);
  ScalarField out = div_A(w, cof);
  out *= -1.0;
  detail::zero_faces(out);
  return out;
}

// Right-preconditioned restarted GMRES on -A_ij D_j(A_ik D_k q) = rhs.
inline EllipticSolution solve_compatible(const CofactorData& cof, const ScalarField& rhs,
                                         const BoundaryField& dirichlet, const SolverConfig& cfg = {}) {
  if (!(cfg.tol > 0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  const auto& g = rhs.grid();
  const auto& pre = flat_poisson(g, VerticalClosure::composed);
  ScalarField x0 = detail::lift(g, dirichlet);
  ScalarField b = rhs;
  detail::zero_faces(b);
  b -= apply_compatible_operator(cof, x0);
  const double bn = detail::norm(b);
  EllipticSolution out{x0, {0, 0.0}};
  if (bn == 0.0) return out;

  const int m = std::max(1, cfg.restart);
  ScalarField y(g);  // accumulated preconditioned correction, x = x0 + P y
  ScalarField r = b;
  double rel = 1.0;
  int total = 0;
  std::vector<ScalarField> V;
  std::vector<ScalarField> Z;
  Eigen::MatrixXd H;
  Eigen::VectorXd cs, sn, s;
  while (total < cfg.max_iter) {
    const double beta = detail::norm(r);
    rel = beta / bn;
    if (rel <= cfg.tol) break;
    V.assign(1, (1.0 / beta) * r);
    Z.clear();
    H = Eigen::MatrixXd::Zero(m + 1, m);
    cs = Eigen::VectorXd::Zero(m);
    sn = Eigen::VectorXd::Zero(m);
    s = Eigen::VectorXd::Zero(m + 1);
    s(0) = beta;
    int j = 0;
    for (; j < m && total < cfg.max_iter; ++j, ++total) {
      Z.push_back(pre.solve_homogeneous(V[j]));
      ScalarField w = apply_compatible_operator(cof, Z[j]);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = detail::dot(w, V[i]);
        w.axpy(-H(i, j), V[i]);
      }
      const double hn = detail::norm(w);
      H(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double den = std::hypot(H(j, j), H(j + 1, j));
      cs(j) = H(j, j) / den;
      sn(j) = H(j + 1, j) / den;
      H(j, j) = den;
      H(j + 1, j) = 0.0;
      s(j + 1) = -sn(j) * s(j);
      s(j) = cs(j) * s(j);
      rel = std::abs(s(j + 1)) / bn;
      if (!std::isfinite(rel)) throw NoConvergence(std::size_t(total + 1), rel);
      if (rel <= cfg.tol || hn == 0.0) {
        ++j;
        ++total;
        break;
      }
      V.push_back((1.0 / hn) * w);
    }
    // Back substitution for the j x j triangular system.
    Eigen::VectorXd coef = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(s.head(j));
    ScalarField dx(g);
    for (int i = 0; i < j; ++i) dx.axpy(coef(i), Z[i]);
    y += dx;
    r = b - apply_compatible_operator(cof, y);
    rel = detail::norm(r) / bn;
    if (rel <= cfg.tol) break;
  }
  if (!(rel <= cfg.tol)) throw NoConvergence(std::size_t(cfg.max_iter), rel);
  out.q += y;
  out.info = {total, rel};
  return out;
}

// ---------------------------------------------------------------------------
// Pressure problem

struct PressureSources {
  ScalarField G1;
  ScalarField G2;
  ScalarField G;  // G1 + b0 . grad G2
};

// G1 = sum_i J dA_ij d_j v_i + [J A_ij d_j, b0.grad](b0.grad eta)_i
// G2 = sum_i J A_ij d_j (b0.grad eta_i)
inline PressureSources pressure_sources(const VectorField& v, const FlowMap& eta, const CofactorData& cof,
                                        const TensorField& dt_A, const VectorField& b0) {
  const auto& g = v.grid();
  const VectorField b = pullback_field(b0, eta);
  PressureSources s{ScalarField(g), ScalarField(g), ScalarField(g)};
  for (int i = 0; i < 3; ++i) {
    const VectorField dv = gradient(v[i]);
    const VectorField db = gradient(b[i]);
    const VectorField dLb = gradient(directional(b0, b[i]));
    ScalarField JAdb(g);
    for (int j = 0; j < 3; ++j)
      for (std::size_t n = 0; n < g.size(); ++n) {
        const double J = cof.J[n];
        s.G1[n] += J * dt_A(i, j)[n] * dv[j][n] + J * cof.A(i, j)[n] * dLb[j][n];
        JAdb[n] += J * cof.A(i, j)[n] * db[j][n];
      }
    s.G2 += JAdb;
    s.G1 -= directional(b0, JAdb);
  }
  s.G = s.G1 + directional(b0, s.G2);
  return s;
}

enum class PressureForm { compatible, flux };

// q = 0 on Gamma with -Div(E grad q) = -G (flux form) or the compatible
// equation -A_ij D_j(A_ik D_k q) = -G/J.
inline EllipticSolution solve_pressure(const PressureSources& src, const CofactorData& cof,
                                       PressureForm form = PressureForm::compatible,
                                       const SolverConfig& cfg = {}) {
  const auto& g = cof.J.grid();
  BoundaryField zero(g, 1);
  if (form == PressureForm::flux) return solve_variable(pressure_matrix(cof), -src.G, zero, cfg);
  ScalarField rhs(g);
  for (std::size_t n = 0; n < g.size(); ++n) rhs[n] = -src.G[n] / cof.J[n];
  return solve_compatible(cof, rhs, zero, cfg);
}

// -Delta q0 = d_j v_i d_i v_j - d_j b_i d_i b_j, q0 = 0 on Gamma.
inline ScalarField initial_pressure(const VectorField& v0, const VectorField& b0) {
  const auto& g = v0.grid();
  const TensorField dv = jacobian(v0);
  const TensorField db = jacobian(b0);
  ScalarField rhs(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (std::size_t n = 0; n < g.size(); ++n)
        rhs[n] += dv(i, j)[n] * dv(j, i)[n] - db(i, j)[n] * db(j, i)[n];
  return solve_flat_poisson(rhs, BoundaryField(g, 1));
}

}  // namespace mhdl
