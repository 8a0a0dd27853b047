#pragma once

// Observers of a flow state: the higher order energy, conserved quantities,
// good-unknown identity residuals and Monte-Carlo checks of the product,
// commutator and trace inequalities.
//
// The tangential derivative written as a bar-d is taken along x1; the fourth
// order tangential operator of the good unknowns is d1^2 (d1^2 + d2^2).

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhdl/dynamics.hpp"
#include "mhdl/elliptic.hpp"
#include "mhdl/geometry.hpp"
#include "mhdl/grid.hpp"
#include "mhdl/smoothing.hpp"

namespace mhdl {

// ---------------------------------------------------------------------------
// Energy

struct EnergyReport {
  double v4sq = 0.0;
  double eta4sq = 0.0;
  double beta4sq = 0.0;      // |b0 . grad eta|_4^2
  double trace_term = 0.0;   // |dbar^4 eta . n|_0^2
  double total = 0.0;
  double trace_kappa = 0.0;  // |dbar^4 Lambda eta_i A^kappa_i3|_0^2, zero when kappa = 0
};

namespace detail {

// Squared boundary L2 of sum over ordered 4-tuples of tangential directions,
// grouped by binomial multiplicity: sum_a C(4,a) |d1^a d2^(4-a) f|^2.
template <class F>
double tangential4_sq(const BoundaryField& f, F&& combine) {
  static constexpr double binom[5] = {1, 4, 6, 4, 1};
  double s = 0.0;
  for (int a = 0; a <= 4; ++a) {
    const BoundaryField d = combine(tangential_derivative(f, a, 4 - a));
    const double n = boundary_l2(d);
    s += binom[a] * n * n;
  }
  return s;
}

}  // namespace detail

// |eta|_4^2 for eta = x + d, with the affine part handled analytically.
inline double flow_map_norm4_sq(const FlowMap& eta) {
  const auto& g = eta.grid();
  const auto& d = eta.displacement;
  double s = detail::sq(volume_norm(d, 4));
  for (int i = 0; i < 3; ++i) {
    const ScalarField xi = ScalarField::from_function(g, [i](double x, double y, double z) {
      return i == 0 ? x : (i == 1 ? y : z);
    });
    s += inner(xi, xi) + 2.0 * inner(xi, d[i]);
    const ScalarField di = partial(d[i], i + 1);
    s += inner(ScalarField(g, 1.0), ScalarField(g, 1.0)) + 2.0 * inner(ScalarField(g, 1.0), di);
  }
  return s;
}

inline EnergyReport energy(const FlowState& s, const StepperConfig& cfg = {}) {
  EnergyReport r;
  r.v4sq = detail::sq(volume_norm(s.v, 4));
  r.eta4sq = flow_map_norm4_sq(s.eta);
  r.beta4sq = detail::sq(volume_norm(pullback_field(s.b0, s.eta), 4));
  const BoundaryField n = unit_normal(cofactor(s.eta, {cfg.j_min, false, 0.125}));
  const BoundaryField d = trace(s.eta.displacement);
  r.trace_term = detail::tangential4_sq(d, [&](const BoundaryField& t) {
    BoundaryField out(t.grid(), 1);
    for (int i = 0; i < 3; ++i) out += t.component(i) * n.component(i);
    return out;
  });
  r.total = r.v4sq + r.eta4sq + r.beta4sq + r.trace_term;
  if (s.kappa > 0) {
    const MollifierSpec spec = cfg.mollifier(s.kappa);
    const CofactorData ck = cofactor(boundary_smoother(s.eta, spec), {cfg.j_min, false, 0.125});
    const BoundaryField ld = mollify(d, spec);
    r.trace_kappa = detail::tangential4_sq(ld, [&](const BoundaryField& t) {
      BoundaryField out(t.grid(), 1);
      for (int i = 0; i < 3; ++i) out += t.component(i) * trace(ck.A(i, 2));
      return out;
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Invariants

struct InvariantReport {
  double j_dev = 0.0;
  double a_dev = 0.0;
  double piola = 0.0;
  double div_v = 0.0;
  double frozen_mismatch = 0.0;
  double taylor_min = 0.0;
  double divb0 = 0.0;
  std::vector<std::string> warnings;
};

struct InvariantOptions {
  double lambda = 0.0;          // Taylor floor; warn below lambda / 2
  bool monitor_taylor = false;  // warn when the Taylor band is left
  bool enforce_taylor = false;  // throw TaylorViolation instead
  double band = 0.125;
};

inline InvariantReport invariants(const FlowState& s, const InvariantOptions& opt = {}, const StepperConfig& cfg = {}) {
  InvariantReport r;
  const CofactorOptions co{cfg.j_min, false, 0.125};
  const CofactorData cof = cofactor(s.eta, co);
  const CofactorData ck =
      s.kappa > 0 ? cofactor(boundary_smoother(s.eta, cfg.mollifier(s.kappa)), co) : cof;
  r.j_dev = j_deviation(cof);
  r.a_dev = a_deviation(cof);
  r.piola = max_abs(piola_residual(cof));
  r.div_v = l2_norm(div_A(s.v, ck));
  r.frozen_mismatch = l2_norm(s.b - pullback_field(s.b0, s.eta));
  r.taylor_min = taylor_min(s.q);
  r.divb0 = l2_norm(divergence(s.b0));

  const double jk = j_deviation(ck), ak = a_deviation(ck);
  if (jk > opt.band) r.warnings.push_back("|J^kappa - 1| = " + std::to_string(jk) + " exceeds band");
  if (ak > opt.band) r.warnings.push_back("|A^kappa - I| = " + std::to_string(ak) + " exceeds band");
  if ((opt.monitor_taylor || opt.enforce_taylor) && !(r.taylor_min >= 0.5 * opt.lambda)) {
    if (opt.enforce_taylor) throw TaylorViolation(s.t, r.taylor_min, 0.5 * opt.lambda);
    r.warnings.push_back("Taylor sign below lambda/2: " + std::to_string(r.taylor_min));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Good unknowns

namespace detail {

// d1^2 (d1^2 + d2^2)
inline ScalarField good_op(const ScalarField& f) {
  const auto& g = f.grid();
  return apply_horizontal_symbol(f, [&](int k1, int k2) {
    const auto a = deriv_symbol(k1, g.n1), b = deriv_symbol(k2, g.n2);
    return a * a * (a * a + b * b);
  });
}

// d1 (d1^2 + d2^2)
inline ScalarField good_op3(const ScalarField& f) {
  const auto& g = f.grid();
  return apply_horizontal_symbol(f, [&](int k1, int k2) {
    const auto a = deriv_symbol(k1, g.n1), b = deriv_symbol(k2, g.n2);
    return a * (a * a + b * b);
  });
}

inline BoundaryField good_op(const BoundaryField& f) {
  const auto& g = f.grid();
  return apply_horizontal_symbol(f, [&](int k1, int k2) {
    const auto a = deriv_symbol(k1, g.n1), b = deriv_symbol(k2, g.n2);
    return a * a * (a * a + b * b);
  });
}

// Geometry shared by every commutator evaluation.
struct GoodUnknownGeometry {
  CofactorData cof;                 // A^kappa
  VectorField T_eta;                // T eta^kappa
  std::array<ScalarField, 9> SY;    // S(Y_ij), Y_ij = A_il (d1 d_l eta_m) A_mj, S = d1 Delta_*
  std::array<ScalarField, 9> AASX;  // sum_lm A_il A_mj S(d1 d_l eta_m)
};

inline GoodUnknownGeometry good_geometry(const FlowMap& eta_k, CofactorData cof) {
  const auto& g = eta_k.grid();
  GoodUnknownGeometry G{std::move(cof), VectorField(g), {}, {}};
  for (int m = 0; m < 3; ++m) G.T_eta[m] = good_op(eta_k.displacement[m]);
  std::array<ScalarField, 9> X, SX;  // X_lm = d1 d_l eta_m
  for (int l = 0; l < 3; ++l)
    for (int m = 0; m < 3; ++m) {
      X[3 * l + m] = tangential_derivative(G.cof.grad_eta(m, l), 1);
      SX[3 * l + m] = good_op3(X[3 * l + m]);
    }
  const auto& A = G.cof.A;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      ScalarField Y(g), Z(g);
      for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m)
          for (std::size_t n = 0; n < g.size(); ++n) {
            const double w = A(i, l)[n] * A(m, j)[n];
            Y[n] += w * X[3 * l + m][n];
            Z[n] += w * SX[3 * l + m][n];
          }
      G.SY[3 * i + j] = good_op3(Y);
      G.AASX[3 * i + j] = std::move(Z);
    }
  return G;
}

// T eta^kappa . grad_A f
inline ScalarField eta_dot_grad(const GoodUnknownGeometry& G, const ScalarField& f) {
  const VectorField ga = grad_A(f, G.cof);
  ScalarField out(f.grid());
  for (int m = 0; m < 3; ++m) out += G.T_eta[m] * ga[m];
  return out;
}

// T f - T eta^kappa . grad_A f
inline ScalarField good_unknown(const GoodUnknownGeometry& G, const ScalarField& f) {
  return good_op(f) - eta_dot_grad(G, f);
}

// C_i(f) = [T, A_ij, d_j f] + T eta^kappa . grad_A(d^A_i f) - [S, A_il A_mj](d1 d_l eta_m) d_j f,
// so that T(d^A_i f) = d^A_i(T f - T eta^kappa . grad_A f) + C_i(f).
inline ScalarField good_commutator(const GoodUnknownGeometry& G, int i, const ScalarField& f,
                                   const VectorField& df) {
  const auto& g = f.grid();
  const auto& A = G.cof.A;
  ScalarField Adf(g);
  for (int j = 0; j < 3; ++j) Adf += A(i, j) * df[j];
  ScalarField out = good_op(Adf);
  for (int j = 0; j < 3; ++j) {
    out -= good_op(A(i, j)) * df[j];
    out -= A(i, j) * good_op(df[j]);
    out -= (G.SY[3 * i + j] - G.AASX[3 * i + j]) * df[j];
  }
  out += eta_dot_grad(G, Adf);
  return out;
}

}  // namespace detail

struct GoodUnknownResidual {
  double res_momentum = 0.0;
  double res_div = 0.0;
  double res_bc = 0.0;
};

// L2 residuals of the three good-unknown identities at a state (kappa > 0):
//   momentum: V_t + grad_A Q - (b0.grad) T(b0.grad eta) - F, with
//             F = -d/dt(T eta^kappa . grad_A v) - C(q) + [T, b0.grad](b0.grad eta)
//   div:      div_A V + C_i(v_i) - T(div_A v)   (the last term vanishes for div_A v = 0)
//   bc:       Q + T Lambda^2 eta_i A_i3 d3 q on Gamma
// Time derivatives come from rhs_kappa.
inline GoodUnknownResidual good_unknown_residual(const FlowState& s, const StepperConfig& cfg = {}) {
  if (!(s.kappa > 0)) throw std::invalid_argument("good_unknown_residual: kappa must be positive");
  const auto& g = s.grid();
  const MollifierSpec spec = cfg.mollifier(s.kappa);
  const KappaRhs k = rhs_kappa(s, cfg);
  const FlowMap eta_k = boundary_smoother(s.eta, spec);
  const detail::GoodUnknownGeometry G = detail::good_geometry(eta_k, k.cof_kappa);
  const auto& A = G.cof.A;

  // d/dt (T eta^kappa . grad_A v_i) = T eta_k_dot . grad_A v + T eta^kappa_m dA_mj d_j v + T eta^kappa . grad_A v_t
  const VectorField eta_k_dot = smooth_boundary_linear(k.eta_dot, spec);
  const TensorField dA = cofactor_variation(G.cof, jacobian(eta_k_dot));
  VectorField T_eta_dot(g);
  for (int m = 0; m < 3; ++m) T_eta_dot[m] = detail::good_op(eta_k_dot[m]);

  const VectorField dq = gradient(k.q);
  const ScalarField Q = detail::good_unknown(G, k.q);
  const VectorField gQ = grad_A(Q, G.cof);
  const VectorField beta = pullback_field(s.b0, s.eta);

  GoodUnknownResidual r;
  double mom = 0.0;
  ScalarField divV(g), sumC(g);
  for (int i = 0; i < 3; ++i) {
    const VectorField dv = gradient(s.v[i]);
    const VectorField gav = grad_A(s.v[i], G.cof);
    ScalarField D(g);  // d/dt (T eta^kappa . grad_A v_i)
    for (int m = 0; m < 3; ++m) D += T_eta_dot[m] * gav[m];
    for (int m = 0; m < 3; ++m) {
      ScalarField dAdv(g);
      for (int j = 0; j < 3; ++j) dAdv += dA(m, j) * dv[j];
      D += G.T_eta[m] * dAdv;
    }
    D += detail::eta_dot_grad(G, k.v_dot[i]);

    const ScalarField V_t = detail::good_op(k.v_dot[i]) - D;
    const ScalarField Tbeta = detail::good_op(beta[i]);
    const ScalarField comm_b = detail::good_op(directional(s.b0, beta[i])) - directional(s.b0, Tbeta);
    const ScalarField F = -1.0 * D - detail::good_commutator(G, i, k.q, dq) + comm_b;
    const ScalarField res = V_t + gQ[i] - directional(s.b0, Tbeta) - F;
    mom += inner(res, res);

    const ScalarField Vi = detail::good_unknown(G, s.v[i]);
    const VectorField dVi = gradient(Vi);
    for (int j = 0; j < 3; ++j) divV += A(i, j) * dVi[j];
    sumC += detail::good_commutator(G, i, s.v[i], dv);
  }
  r.res_momentum = std::sqrt(mom);
  r.res_div = l2_norm(divV + sumC - detail::good_op(div_A(s.v, G.cof)));

  const BoundaryField lhs = trace(Q);
  const BoundaryField d3q = trace(dq[2]);
  BoundaryField rhs(g, 1);
  const BoundaryField Tl = detail::good_op(mollify(trace(s.eta.displacement), spec, 2));
  for (int i = 0; i < 3; ++i) rhs += Tl.component(i) * trace(A(i, 2)) * d3q;
  r.res_bc = boundary_l2(lhs + rhs);
  return r;
}

// ---------------------------------------------------------------------------
// Lemma harness

struct LemmaCheck {
  std::string lemma_id;
  double empirical_ratio = 0.0;  // sup over samples of LHS / RHS
  int sample_count = 0;
};

struct LemmaConfig {
  GridSpec grid{32, 32, 16, 4};  // fourth order keeps the H^1 norms of hodd resolved
  double kappa = 0.1;
  unsigned seed = 1;
  double scale = 1.0;  // multiplies every random input; ratios are invariant
};

inline const std::vector<std::string>& lemma_ids() {
  static const std::vector<std::string> ids{"test3", "loss", "es0-0", "es1-0", "es1-1/2", "co0",
                                            "co1",   "co2",  "co123", "hodd",  "gga"};
  return ids;
}

namespace detail {

struct Mode {
  int k1, k2;
  double amp, phase, c, phi;
};

// Random trigonometric modes with |k| in [kmin, kmax].
inline std::vector<Mode> random_modes(std::mt19937_64& rng, double kmin, double kmax, int count) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int K = int(std::ceil(kmax));
  std::vector<std::pair<int, int>> pool;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b) {
      const double r = std::hypot(double(a), double(b));
      if (r >= kmin && r <= kmax && r > 0) pool.emplace_back(a, b);
    }
  if (pool.empty()) pool.emplace_back(1, 0);
  std::vector<Mode> modes;
  for (int n = 0; n < count; ++n) {
    const auto [a, b] = pool[std::min(pool.size() - 1, std::size_t(u(rng) * double(pool.size())))];
    modes.push_back({a, b, 2 * u(rng) - 1, two_pi * u(rng), 0.5 + 2.5 * u(rng), two_pi * u(rng)});
  }
  return modes;
}

inline BoundaryField boundary_from_modes(const GridSpec& g, const std::vector<Mode>& modes, double scale,
                                         double offset = 0.0) {
  return BoundaryField::from_function(g, [&](Face f, double x, double y) {
    double s = offset;
    for (const auto& m : modes)
      s += m.amp * std::cos(two_pi * (m.k1 * x + m.k2 * y) + m.phase + (f == Face::top ? m.phi : 0.0));
    return scale * s;
  });
}

inline ScalarField volume_from_modes(const GridSpec& g, const std::vector<Mode>& modes, double scale) {
  return ScalarField::from_function(g, [&](double x, double y, double z) {
    double s = 0.0;
    for (const auto& m : modes) s += m.amp * std::cos(two_pi * (m.k1 * x + m.k2 * y) + m.phase) * std::cos(m.c * z + m.phi);
    return scale * s;
  });
}

// |h|_{W^{1,inf}} on the faces: max|h| + max|d1 h| + max|d2 h|
inline double boundary_w1inf(const BoundaryField& h) {
  return boundary_max(h) + boundary_max(tangential_derivative(h, 1)) + boundary_max(tangential_derivative(h, 2));
}

// ||D^k f||_0 over all multi-indices with |alpha| = k.
inline double volume_seminorm(const ScalarField& f, int k) {
  const double hi = volume_seminorm_sum(f, k);
  const double lo = k > 0 ? volume_seminorm_sum(f, k - 1) : 0.0;
  return std::sqrt(std::max(0.0, hi - lo));
}

// ||D f||_s = (sum_j ||d_j f||_s^2)^(1/2)
inline double grad_norm(const ScalarField& f, int s) { return volume_norm(gradient(f), s); }

// D^alpha for alpha = (a, b, c)
inline ScalarField d_alpha(const ScalarField& f, int a, int b, int c) {
  ScalarField h = (a == 0 && b == 0) ? f : tangential_derivative(f, a, b);
  for (int n = 0; n < c; ++n) h = vertical_derivative(h, 1);
  return h;
}

}  // namespace detail

// Monte-Carlo sup of LHS / RHS for one inequality. The function hit by the
// mollifier is drawn at its scale 1 / (2 pi kappa), so ratios do not drift
// with kappa; multipliers and the volume lemmas use fixed low bands. The
// derivative loss is checked as |dbar Lambda h|_0 <= C kappa^(s-1) |h|_s.
inline LemmaCheck lemma_harness(const std::string& which, int samples, const LemmaConfig& cfg = {}) {
  if (samples <= 0) throw std::invalid_argument("lemma_harness: samples must be positive");
  const auto& g = cfg.grid;
  g.validate();
  const MollifierSpec spec{cfg.kappa};
  spec.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double K0 = 1.0 / (two_pi * cfg.kappa);
  const double kmax_grid = 0.45 * std::min(g.n1, g.n2);
  const double kl = std::max(1.0, 0.5 * K0), kh = std::min(kmax_grid, std::max(2.0 * K0, 1.5));
  const double sc = cfg.scale;
  double sup = 0.0;

  for (int n = 0; n < samples; ++n) {
    double ratio = 0.0;
    if (which == "test3") {
      const auto h = detail::boundary_from_modes(g, detail::random_modes(rng, 0, kh, 6), sc);
      const double s = 0.5 * std::floor(u(rng) * 8.0);
      ratio = boundary_norm(mollify(h, spec), s) / boundary_norm(h, s);
    } else if (which == "loss") {
      const auto h = detail::boundary_from_modes(g, detail::random_modes(rng, kl, kh, 6), sc);
      const double s = 0.5 * std::floor(u(rng) * 3.0);
      ratio = std::pow(cfg.kappa, 1.0 - s) * boundary_l2(tangential_derivative(mollify(h, spec), 1)) / boundary_norm(h, s);
    } else if (which == "es0-0" || which == "es1-0" || which == "es1-1/2") {
      const auto h = detail::boundary_from_modes(g, detail::random_modes(rng, kl, kh, 4), sc);
      const auto gg = detail::boundary_from_modes(g, detail::random_modes(rng, kl, kh, 6), sc);
      if (which == "es0-0") {
        ratio = boundary_l2(mollifier_commutator(h, gg, spec)) / (boundary_max(h) * boundary_l2(gg));
      } else if (which == "es1-0") {
        ratio = boundary_l2(mollifier_commutator(h, tangential_derivative(gg, 1), spec)) /
                (detail::boundary_w1inf(h) * boundary_l2(gg));
      } else {
        ratio = boundary_norm(mollifier_commutator(h, tangential_derivative(gg, 1), spec), 0.5) /
                (detail::boundary_w1inf(h) * boundary_norm(gg, 0.5));
      }
    } else if (which == "co0" || which == "co1" || which == "co2") {
      const auto f = detail::volume_from_modes(g, detail::random_modes(rng, 0, 3, 5), sc);
      const auto h = detail::volume_from_modes(g, detail::random_modes(rng, 0, 3, 5), sc);
      const int k = 3;
      int a = int(u(rng) * 4.0), b = int(u(rng) * double(4 - a));
      const int c = k - a - b;
      a = std::min(a, 3);
      if (which == "co0") {
        ratio = l2_norm(detail::d_alpha(f * h, a, b, c)) /
                (volume_norm(f, k) * volume_norm(h, k / 2 + 2) + volume_norm(f, k / 2 + 2) * volume_norm(h, k));
      } else if (which == "co1") {
        const ScalarField lhs = detail::d_alpha(f * h, a, b, c) - f * detail::d_alpha(h, a, b, c);
        const int lo = (k - 1) / 2 + 2;
        ratio = l2_norm(lhs) / (detail::grad_norm(f, k - 1) * volume_norm(h, lo) +
                                detail::grad_norm(f, std::min(lo, 3)) * volume_norm(h, k - 1));
      } else {
        const ScalarField lhs = detail::d_alpha(f * h, a, b, c) - detail::d_alpha(f, a, b, c) * h -
                                f * detail::d_alpha(h, a, b, c);
        const int lo = (k - 2) / 2 + 2;
        ratio = l2_norm(lhs) / (detail::grad_norm(f, k - 2) * detail::grad_norm(h, lo) +
                                detail::grad_norm(f, lo) * detail::grad_norm(h, k - 2));
      }
    } else if (which == "co123") {
      const auto gg = detail::boundary_from_modes(g, detail::random_modes(rng, 0, 3, 4), sc, 1.0);
      const auto h = detail::boundary_from_modes(g, detail::random_modes(rng, 0, 6, 6), sc);
      ratio = boundary_norm(gg * h, 0.5) / (detail::boundary_w1inf(gg) * boundary_norm(h, 0.5));
    } else if (which == "hodd") {
      // Gradients of harmonic functions: curl-free and divergence-free.
      const auto modes = detail::random_modes(rng, 1, 1.5, 4);
      const ScalarField phi = ScalarField::from_function(g, [&](double x, double y, double z) {
        double s = 0.0;
        for (const auto& m : modes) {
          const double k = two_pi * std::hypot(double(m.k1), double(m.k2));
          s += m.amp * std::cos(two_pi * (m.k1 * x + m.k2 * y) + m.phase) * std::cosh(k * (z - m.c / 3.0)) /
               std::cosh(k);
        }
        return sc * s;
      });
      const VectorField w = gradient(phi);
      const BoundaryField tn = trace(w[2]);
      BoundaryField n_w(g, 1);
      for (int face = 0; face < 2; ++face) {
        auto src = tn.at(Face(face), 0);
        auto dst = n_w.at(Face(face), 0);
        for (std::size_t p = 0; p < src.size(); ++p) dst[p] = reference_normal_sign(Face(face)) * src[p];
      }
      const double rhs = l2_norm(w) + l2_norm(curl(w)) + l2_norm(divergence(w)) +
                         boundary_norm(tangential_derivative(n_w, 1), -0.5);
      ratio = volume_norm(w, 1) / rhs;
    } else if (which == "gga") {
      VectorField w(g);
      for (int i = 0; i < 3; ++i) w[i] = detail::volume_from_modes(g, detail::random_modes(rng, 1, 4, 4), sc);
      const BoundaryField tn = trace(w[2]);
      BoundaryField n_w(g, 1);
      for (int face = 0; face < 2; ++face) {
        auto src = tn.at(Face(face), 0);
        auto dst = n_w.at(Face(face), 0);
        for (std::size_t p = 0; p < src.size(); ++p) dst[p] = reference_normal_sign(Face(face)) * src[p];
      }
      VectorField d1w{tangential_derivative(w[0], 1), tangential_derivative(w[1], 1), tangential_derivative(w[2], 1)};
      ratio = boundary_norm(tangential_derivative(n_w, 1), -0.5) / (l2_norm(d1w) + l2_norm(divergence(w)));
    } else {
      throw std::invalid_argument("lemma_harness: unknown lemma '" + which + "'");
    }
    if (!std::isfinite(ratio)) throw std::runtime_error("lemma_harness: non-finite ratio for " + which);
    sup = std::max(sup, ratio);
  }
  return {which, sup, samples};
}

}  // namespace mhdl
