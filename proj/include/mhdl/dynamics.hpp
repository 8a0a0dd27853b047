#pragma once

// Time evolution: the nonlinear kappa-problem stepper, the linear sub-solvers
// of the eps-kappa problem and the fixed-point constructor built on them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhdl/elliptic.hpp"
#include "mhdl/errors.hpp"
#include "mhdl/geometry.hpp"
#include "mhdl/grid.hpp"
#include "mhdl/smoothing.hpp"

namespace mhdl {

enum class Scheme { rk4, euler };

struct FlowState {
  double t = 0.0;
  FlowMap eta;
  VectorField v;
  ScalarField q;   // pressure solved at (eta, v)
  VectorField b0;
  double kappa = 0.0;
  double epsilon = 0.0;
  VectorField b;   // magnetic field integrated by its own equation

  // eta = Id, q = 0, b = b0
  static FlowState initial(VectorField v0, VectorField b0, double kappa = 0.0, double epsilon = 0.0) {
    const GridSpec g = v0.grid();
    FlowState s;
    s.eta = FlowMap::identity(g);
    s.q = ScalarField(g);
    s.b = b0;
    s.v = std::move(v0);
    s.b0 = std::move(b0);
    s.kappa = kappa;
    s.epsilon = epsilon;
    return s;
  }

  const GridSpec& grid() const noexcept { return v.grid(); }
  bool operator==(const FlowState&) const = default;
};

struct StepperConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::rk4;
  double lambda = 0.0;          // Taylor floor; the monitor trips below lambda / 2
  bool monitor_taylor = false;
  bool enforce_bands = false;   // |A^kappa - I| <= 1/8 as a hard error
  double j_min = 0.5;
  PressureForm pressure = PressureForm::compatible;
  SolverConfig solver;
  bool evolve_b = true;
  bool dealias = false;         // 2/3 filter on the stage derivatives
  std::function<double(double)> multiplier;  // empty: Gaussian

  void validate() const {
    if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("StepperConfig: dt must be positive");
  }

  MollifierSpec mollifier(double kappa) const {
    MollifierSpec m{kappa};
    if (multiplier) m.multiplier = multiplier;
    return m;
  }

  CofactorOptions cofactor_options() const { return {j_min, enforce_bands, 0.125}; }
};

// min over Gamma of -grad q . N with the reference normal N = -e3 / +e3.
inline double taylor_min(const ScalarField& q) {
  const BoundaryField d3 = trace(vertical_derivative(q, 1));
  double m = INFINITY;
  for (int face = 0; face < 2; ++face)
    for (double x : d3.at(Face(face), 0)) m = std::min(m, -reference_normal_sign(Face(face)) * x);
  return m;
}

// d/dt b = b . grad_A u, i.e. b_j A_jk d_k u_i
inline VectorField b_rate(const VectorField& b, const CofactorData& cof, const VectorField& u) {
  const auto& g = b.grid();
  VectorField c(g);  // c_k = b_j A_jk
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (std::size_t n = 0; n < g.size(); ++n) c[k][n] += b[j][n] * cof.A(j, k)[n];
  return directional(c, u);
}

struct KappaRhs {
  VectorField eta_dot;
  VectorField v_dot;
  VectorField b_dot;  // zero unless evolve_b
  ScalarField q;
  CofactorData cof_kappa;
  SolveInfo info;
};

// Right-hand side of the kappa-problem at a state. kappa = 0 drops the
// smoothing (eta^kappa = eta, psi = 0).
inline KappaRhs rhs_kappa(const FlowState& s, const StepperConfig& cfg) {
  const auto& g = s.grid();
  const bool smooth = s.kappa > 0;
  const MollifierSpec spec = cfg.mollifier(smooth ? s.kappa : 1.0);

  const FlowMap eta_k = smooth ? boundary_smoother(s.eta, spec) : s.eta;
  CofactorData cof = cofactor(eta_k, cfg.cofactor_options());
  VectorField eta_dot = s.v;
  if (smooth) eta_dot += modification_term(s.eta, s.v, cof, spec);
  const VectorField eta_k_dot = smooth ? smooth_boundary_linear(eta_dot, spec) : eta_dot;
  const TensorField dt_A = cofactor_variation(cof, jacobian(eta_k_dot));
  const VectorField L = lorentz_force(s.b0, s.eta);

  EllipticSolution p;
  if (cfg.pressure == PressureForm::flux) {
    p = solve_pressure(pressure_sources(s.v, s.eta, cof, dt_A, s.b0), cof, PressureForm::flux, cfg.solver);
  } else {
    // d/dt div_A v = 0: -A_ij D_j(A_ik D_k q) = -(dA_ij D_j v_i + A_ij D_j L_i)
    ScalarField rhs(g);
    for (int i = 0; i < 3; ++i) {
      const VectorField dv = gradient(s.v[i]);
      const VectorField dL = gradient(L[i]);
      for (int j = 0; j < 3; ++j)
        for (std::size_t n = 0; n < g.size(); ++n)
          rhs[n] -= dt_A(i, j)[n] * dv[j][n] + cof.A(i, j)[n] * dL[j][n];
    }
    p = solve_compatible(cof, rhs, BoundaryField(g, 1), cfg.solver);
  }

  VectorField v_dot = L;
  v_dot -= grad_A(p.q, cof);

  VectorField b_dot(g);
  if (cfg.evolve_b) {
    if (smooth)
      b_dot = b_rate(s.b, cofactor(s.eta, {cfg.j_min, false, 0.125}), eta_dot);
    else
      b_dot = b_rate(s.b, cof, eta_dot);
  }
  if (cfg.dealias) {
    eta_dot = dealias(eta_dot);
    v_dot = dealias(v_dot);
    b_dot = dealias(b_dot);
  }
  return {std::move(eta_dot), std::move(v_dot), std::move(b_dot), std::move(p.q), std::move(cof), p.info};
}

namespace detail {

inline FlowState advance(const FlowState& s, const KappaRhs& k, double h) {
  FlowState out = s;
  out.eta.displacement.axpy(h, k.eta_dot);
  out.v.axpy(h, k.v_dot);
  out.b.axpy(h, k.b_dot);
  return out;
}

}  // namespace detail

// Explicit stepper with first-same-as-last reuse: the right-hand side of the
// accepted state is kept and reused as the first stage of the next step.
class Stepper {
 public:
  explicit Stepper(StepperConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const StepperConfig& config() const noexcept { return cfg_; }

  // Right-hand side at s, cached.
  const KappaRhs& rhs(const FlowState& s) {
    if (!cache_ || !(cached_state_ == s)) {
      cache_ = rhs_kappa(s, cfg_);
      cached_state_ = s;
    }
    return *cache_;
  }

  FlowState step(const FlowState& s) {
    const double dt = cfg_.dt;
    iterations_ = 0;
    const KappaRhs k1 = rhs(s);
    FlowState next;
    if (cfg_.scheme == Scheme::euler) {
      next = detail::advance(s, k1, dt);
    } else {
      const KappaRhs k2 = eval(detail::advance(s, k1, 0.5 * dt));
      const KappaRhs k3 = eval(detail::advance(s, k2, 0.5 * dt));
      const KappaRhs k4 = eval(detail::advance(s, k3, dt));
      next = s;
      const double w[4] = {dt / 6, dt / 3, dt / 3, dt / 6};
      const KappaRhs* ks[4] = {&k1, &k2, &k3, &k4};
      for (int m = 0; m < 4; ++m) {
        next.eta.displacement.axpy(w[m], ks[m]->eta_dot);
        next.v.axpy(w[m], ks[m]->v_dot);
        next.b.axpy(w[m], ks[m]->b_dot);
      }
    }
    next.t = s.t + dt;
    next.q = ScalarField(s.grid());
    const KappaRhs& kn = rhs(next);
    iterations_ += kn.info.iterations;
    next.q = kn.q;
    cached_state_.q = kn.q;
    post_step(next);
    return next;
  }

  // GMRES/CG iterations spent in the last step.
  int last_iterations() const noexcept { return iterations_; }
  double last_taylor_min() const noexcept { return taylor_min_; }

 private:
  KappaRhs eval(const FlowState& s) {
    KappaRhs k = rhs_kappa(s, cfg_);
    iterations_ += k.info.iterations;
    return k;
  }

  void post_step(const FlowState& s) {
    taylor_min_ = taylor_min(s.q);
    if (cfg_.monitor_taylor && !(taylor_min_ >= 0.5 * cfg_.lambda))
      throw TaylorViolation(s.t, taylor_min_, 0.5 * cfg_.lambda);
  }

  StepperConfig cfg_;
  std::optional<KappaRhs> cache_;
  FlowState cached_state_;
  int iterations_ = 0;
  double taylor_min_ = 0.0;
};

inline FlowState step(const FlowState& s, const StepperConfig& cfg) { return Stepper(cfg).step(s); }

// State with q set to the pressure solved at (eta, v).
inline FlowState with_pressure(FlowState s, const StepperConfig& cfg) {
  s.q = ScalarField(s.grid());
  s.q = rhs_kappa(s, cfg).q;
  return s;
}

// Integrates the magnetic field by d/dt b = b . grad_A (d/dt eta) alongside the
// flow for n steps and returns it; compare with pullback_field(b0, eta).
inline VectorField evolve_b_direct(const FlowState& s, StepperConfig cfg, int steps) {
  cfg.evolve_b = true;
  Stepper st(cfg);
  FlowState cur = s;
  for (int n = 0; n < steps; ++n) cur = st.step(cur);
  return cur.b;
}

// d/dt b = b . grad_A u with A and u frozen.
inline VectorField evolve_b_frozen(VectorField b, const CofactorData& cof, const VectorField& u, double dt,
                                   int steps, Scheme scheme = Scheme::rk4) {
  for (int n = 0; n < steps; ++n) {
    const VectorField k1 = b_rate(b, cof, u);
    if (scheme == Scheme::euler) {
      b.axpy(dt, k1);
      continue;
    }
    const VectorField k2 = b_rate(b + (0.5 * dt) * k1, cof, u);
    const VectorField k3 = b_rate(b + (0.5 * dt) * k2, cof, u);
    const VectorField k4 = b_rate(b + dt * k3, cof, u);
    b.axpy(dt / 6, k1);
    b.axpy(dt / 3, k2);
    b.axpy(dt / 3, k3);
    b.axpy(dt / 6, k4);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Linear sub-problems of the eps-kappa problem

using TimeSeries = std::function<VectorField(double)>;

// Piecewise-linear interpolation of samples on t_m = m dt.
template <class Field>
Field interpolate_samples(const std::vector<Field>& samples, double dt, double t) {
  if (samples.empty()) throw std::invalid_argument("interpolate_samples: no samples");
  const double x = t / dt;
  const long last = long(samples.size()) - 1;
  long m = std::clamp(long(std::floor(x + 1e-9)), 0L, last);
  if (m == last || std::abs(x - double(m)) < 1e-9) return samples[std::size_t(m)];
  const double w = x - double(m);
  Field out = samples[std::size_t(m)];
  out *= 1.0 - w;
  out.axpy(w, samples[std::size_t(m + 1)]);
  return out;
}

struct StabilityLimit {
  double c_stab = 0.2;
};

// Largest dt for explicit stepping of eps (b0 . grad)^2: c_stab h^2 / (eps max|b0|^2).
inline double eps_dt_bound(const VectorField& b0, double eps, StabilityLimit lim = {}) {
  const auto& g = b0.grid();
  double bmax = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n)
    bmax = std::max(bmax, b0[0][n] * b0[0][n] + b0[1][n] * b0[1][n] + b0[2][n] * b0[2][n]);
  if (!(eps > 0) || bmax == 0.0) return INFINITY;
  const double h = std::min({1.0 / g.n1, 1.0 / g.n2, g.h3()});
  return lim.c_stab * h * h / (eps * bmax);
}

inline void check_eps_stability(const VectorField& b0, double eps, double dt, StabilityLimit lim = {}) {
  if (eps < 0) throw std::invalid_argument("epsilon must be nonnegative");
  const double bound = eps_dt_bound(b0, eps, lim);
  if (dt > bound)
    throw StabilityViolation("dt=" + std::to_string(dt) + " exceeds the explicit eps-term bound " +
                             std::to_string(bound));
}

// d/dt eta - eps (b0 . grad)^2 eta = f1, eta(0) = eta0, by explicit Euler.
// Returns eta at t_m = m dt, m = 0..round(T/dt).
inline std::vector<FlowMap> solve_linear_eta(const TimeSeries& f1, double eps, const VectorField& b0,
                                             const FlowMap& eta0, double dt, double T,
                                             StabilityLimit lim = {}) {
  if (!(dt > 0)) throw std::invalid_argument("solve_linear_eta: dt must be positive");
  check_eps_stability(b0, eps, dt, lim);
  const int M = std::max(0, int(std::lround(T / dt)));
  std::vector<FlowMap> out{eta0};
  out.reserve(std::size_t(M) + 1);
  for (int m = 0; m < M; ++m) {
    FlowMap next = out.back();
    if (eps > 0) next.displacement.axpy(dt * eps, lorentz_force(b0, out.back()));
    next.displacement.axpy(dt, f1(m * dt));
    out.push_back(std::move(next));
  }
  return out;
}

// d/dt v = f2, v(0) = v0: Simpson per step for rk4 (the RK4 stages of a
// t-only right-hand side), left rectangle for euler.
inline std::vector<VectorField> solve_linear_v(const TimeSeries& f2, const VectorField& v0, double dt, double T,
                                               Scheme scheme = Scheme::rk4) {
  if (!(dt > 0)) throw std::invalid_argument("solve_linear_v: dt must be positive");
  const int M = std::max(0, int(std::lround(T / dt)));
  std::vector<VectorField> out{v0};
  out.reserve(std::size_t(M) + 1);
  for (int m = 0; m < M; ++m) {
    const double t = m * dt;
    VectorField next = out.back();
    if (scheme == Scheme::euler) {
      next.axpy(dt, f2(t));
    } else {
      next.axpy(dt / 6, f2(t));
      next.axpy(2 * dt / 3, f2(t + 0.5 * dt));
      next.axpy(dt / 6, f2(t + dt));
    }
    out.push_back(std::move(next));
  }
  return out;
}

// -A_ij D_j(A_il D_l q) = f3, q = 0 on Gamma. The flux form solves the
// J-weighted equation -Div(J A^T A grad q) = J f3.
inline ScalarField solve_linear_q(const CofactorData& cof_tilde, const ScalarField& f3, const SolverConfig& cfg = {},
                                  PressureForm form = PressureForm::compatible) {
  const auto& g = f3.grid();
  if (form == PressureForm::flux) return solve_variable(pressure_matrix(cof_tilde), cof_tilde.J * f3, BoundaryField(g, 1), cfg).q;
  return solve_compatible(cof_tilde, f3, BoundaryField(g, 1), cfg).q;
}

// Coefficients frozen from a given trajectory (eta~, v~) at one time.
struct FrozenCoefficients {
  CofactorData cof;   // A(eta~^kappa)
  TensorField dt_A;   // d/dt A(eta~^kappa)
  VectorField psi;    // psi^kappa(v~, eta~)

  FrozenCoefficients& operator*=(double s) {
    for (auto& f : cof.A.c) f *= s;
    for (auto& f : cof.grad_eta.c) f *= s;
    cof.J *= s;
    for (auto& f : dt_A.c) f *= s;
    psi *= s;
    return *this;
  }
  void axpy(double a, const FrozenCoefficients& o) {
    for (int m = 0; m < 9; ++m) {
      cof.A.c[m].axpy(a, o.cof.A.c[m]);
      cof.grad_eta.c[m].axpy(a, o.cof.grad_eta.c[m]);
      dt_A.c[m].axpy(a, o.dt_A.c[m]);
    }
    cof.J.axpy(a, o.cof.J);
    psi.axpy(a, o.psi);
  }
};

// eta_dot is the time derivative of eta~ used for d/dt A.
inline FrozenCoefficients freeze_coefficients(const FlowMap& eta, const VectorField& v, const VectorField& eta_dot,
                                              double kappa, const StepperConfig& cfg) {
  const auto& g = v.grid();
  if (kappa > 0) {
    const MollifierSpec spec = cfg.mollifier(kappa);
    CofactorData cof = cofactor(boundary_smoother(eta, spec), cfg.cofactor_options());
    TensorField dA = cofactor_variation(cof, jacobian(smooth_boundary_linear(eta_dot, spec)));
    VectorField psi = modification_term(eta, v, cof, spec);
    return {std::move(cof), std::move(dA), std::move(psi)};
  }
  CofactorData cof = cofactor(eta, cfg.cofactor_options());
  TensorField dA = cofactor_variation(cof, jacobian(eta_dot));
  return {std::move(cof), std::move(dA), VectorField(g)};
}

// Samples of frozen coefficients on t_m = m dt.
struct CoefficientTrack {
  double dt = 0.0;
  std::vector<FrozenCoefficients> samples;

  FrozenCoefficients at(double t) const { return interpolate_samples(samples, dt, t); }
};

// Linear state (eta, v) of the eps-kappa problem; q is the pressure at t.
struct LinearState {
  double t = 0.0;
  FlowMap eta;
  VectorField v;
  ScalarField q;
};

struct LinearRhs {
  VectorField eta_dot;
  VectorField v_dot;
  ScalarField q;
  SolveInfo info;
};

// d/dt eta = eps (b0.grad)^2 eta + v + psi~, d/dt v = -grad_A~ q + (b0.grad)^2 eta,
// with q keeping div_A~ v constant in time.
inline LinearRhs linear_rhs(const LinearState& s, const FrozenCoefficients& c, const VectorField& b0, double eps,
                            const StepperConfig& cfg) {
  const auto& g = s.v.grid();
  const VectorField L = lorentz_force(b0, s.eta);
  VectorField eta_dot = s.v + c.psi;
  if (eps > 0) eta_dot.axpy(eps, L);
  ScalarField f3(g);
  for (int i = 0; i < 3; ++i) {
    const VectorField dv = gradient(s.v[i]);
    const VectorField dL = gradient(L[i]);
    for (int j = 0; j < 3; ++j)
      for (std::size_t n = 0; n < g.size(); ++n) f3[n] -= c.dt_A(i, j)[n] * dv[j][n] + c.cof.A(i, j)[n] * dL[j][n];
  }
  EllipticSolution p;
  if (cfg.pressure == PressureForm::flux)
    p = solve_variable(pressure_matrix(c.cof), c.cof.J * f3, BoundaryField(g, 1), cfg.solver);
  else
    p = solve_compatible(c.cof, f3, BoundaryField(g, 1), cfg.solver);
  VectorField v_dot = L;
  v_dot -= grad_A(p.q, c.cof);
  return {std::move(eta_dot), std::move(v_dot), std::move(p.q), p.info};
}

// One step of the linear eps-kappa problem with coefficients from the track.
inline LinearState step_eps_kappa(const LinearState& s, const CoefficientTrack& track, const VectorField& b0,
                                  double eps, const StepperConfig& cfg, LinearRhs* k1_out = nullptr) {
  const double dt = cfg.dt;
  check_eps_stability(b0, eps, dt);
  auto add = [](LinearState x, const LinearRhs& k, double h) {
    x.eta.displacement.axpy(h, k.eta_dot);
    x.v.axpy(h, k.v_dot);
    return x;
  };
  const LinearRhs k1 = linear_rhs(s, track.at(s.t), b0, eps, cfg);
  LinearState next;
  if (cfg.scheme == Scheme::euler) {
    next = add(s, k1, dt);
  } else {
    const FrozenCoefficients mid = track.at(s.t + 0.5 * dt);
    const LinearRhs k2 = linear_rhs(add(s, k1, 0.5 * dt), mid, b0, eps, cfg);
    const LinearRhs k3 = linear_rhs(add(s, k2, 0.5 * dt), mid, b0, eps, cfg);
    const LinearRhs k4 = linear_rhs(add(s, k3, dt), track.at(s.t + dt), b0, eps, cfg);
    next = add(s, k1, dt / 6);
    next = add(next, k2, dt / 3);
    next = add(next, k3, dt / 3);
    next = add(next, k4, dt / 6);
  }
  next.t = s.t + dt;
  if (k1_out) *k1_out = k1;
  return next;
}

// ---------------------------------------------------------------------------
// Fixed-point construction

struct IterationState {
  int n = 1;                         // index of the newest iterate
  double dt = 0.0;
  double T = 0.0;
  std::vector<double> times;
  std::vector<FlowMap> eta;          // eta^(n)(t_m)
  std::vector<VectorField> v;        // v^(n)(t_m)
  std::vector<ScalarField> q;        // q^(n)(t_m)
  std::vector<VectorField> eta_dot;  // d/dt eta^(n)(t_m)
  std::vector<double> psi;           // Psi^(1), Psi^(2), ...

  std::vector<double> ratios() const {
    std::vector<double> r;
    for (std::size_t m = 1; m < psi.size(); ++m) r.push_back(psi[m - 1] > 0 ? psi[m] / psi[m - 1] : 0.0);
    return r;
  }
};

struct ConstructConfig {
  int n_max = 20;
  double tol = 1e-20;
  double band = 0.125;  // |J^kappa - 1| and |A^kappa - I| must stay inside
  StepperConfig stepper;
};

namespace detail {

inline double band_excess(const CofactorData& cof, double band) {
  return std::max(j_deviation(cof), a_deviation(cof)) - band;
}

inline double sq(double x) { return x * x; }

}  // namespace detail

// Discrete Psi: max over t_m of |v'|_3^2 + |eta'|_3^2 + |b0.grad eta'|_3^2 + |A'|_2^2.
inline double contraction_metric(const IterationState& a, const IterationState& b, const CoefficientTrack& ca,
                                 const CoefficientTrack& cb, const VectorField& b0) {
  double psi = 0.0;
  for (std::size_t m = 0; m < a.times.size(); ++m) {
    const VectorField de = a.eta[m].displacement - b.eta[m].displacement;
    double s = detail::sq(volume_norm(a.v[m] - b.v[m], 3)) + detail::sq(volume_norm(de, 3)) +
               detail::sq(volume_norm(directional(b0, de), 3));
    TensorField dA = ca.samples[m].cof.A;
    for (int k = 0; k < 9; ++k) dA.c[k] -= cb.samples[m].cof.A.c[k];
    s += detail::sq(volume_norm(dA, 2));
    psi = std::max(psi, s);
  }
  return psi;
}

// Solves the linear problem with the given coefficient track from (Id, v0).
inline IterationState solve_linear_problem(const VectorField& v0, const VectorField& b0, double eps,
                                           const CoefficientTrack& track, int M, const StepperConfig& cfg) {
  const auto& g = v0.grid();
  IterationState it;
  it.dt = cfg.dt;
  it.T = M * cfg.dt;
  LinearState s{0.0, FlowMap::identity(g), v0, ScalarField(g)};
  for (int m = 0; m <= M; ++m) {
    LinearRhs k;
    LinearState next;
    if (m < M) {
      next = step_eps_kappa(s, track, b0, eps, cfg, &k);
    } else {
      k = linear_rhs(s, track.at(s.t), b0, eps, cfg);
    }
    it.times.push_back(m * cfg.dt);
    it.eta.push_back(s.eta);
    it.v.push_back(s.v);
    it.q.push_back(k.q);
    it.eta_dot.push_back(k.eta_dot);
    if (m < M) s = std::move(next);
  }
  return it;
}

// The linearization iteration: iterate n+1 solves the linear problem with
// A^{kappa(n)} and psi^{kappa(n)} frozen from iterate n, seeded with
// iterates 0 and 1 equal to (eta, v, q) = (Id, 0, 0). Stops when Psi < tol.
//
// Throws NoContraction when Psi grows for 3 consecutive iterations or an
// iterate leaves the coefficient band, both signs that T is too large.
inline IterationState fixed_point_construct(const VectorField& v0, const VectorField& b0, double kappa, double eps,
                                            double T, const ConstructConfig& cc = {}) {
  if (!(kappa > 0)) throw std::invalid_argument("fixed_point_construct: kappa must be positive");
  if (!(T > 0)) throw std::invalid_argument("fixed_point_construct: T must be positive");
  const auto& g = v0.grid();
  const int M = std::max(1, int(std::lround(T / cc.stepper.dt)));
  StepperConfig cfg = cc.stepper;
  cfg.dt = T / M;
  cfg.enforce_bands = false;

  IterationState cur;
  cur.dt = cfg.dt;
  cur.T = T;
  for (int m = 0; m <= M; ++m) {
    cur.times.push_back(m * cfg.dt);
    cur.eta.push_back(FlowMap::identity(g));
    cur.v.push_back(VectorField(g));
    cur.q.push_back(ScalarField(g));
    cur.eta_dot.push_back(VectorField(g));
  }

  auto build_track = [&](const IterationState& it, int n) {
    CoefficientTrack tr{cfg.dt, {}};
    for (int m = 0; m <= M; ++m) {
      FrozenCoefficients c = freeze_coefficients(it.eta[m], it.v[m], it.eta_dot[m], kappa, cfg);
      const double ex = detail::band_excess(c.cof, cc.band);
      if (ex > 0)
        throw NoContraction("iterate " + std::to_string(n) + " leaves the coefficient band at t=" +
                                std::to_string(m * cfg.dt),
                            std::size_t(n));
      tr.samples.push_back(std::move(c));
    }
    return tr;
  };

  CoefficientTrack prev_track = build_track(cur, 1);  // A^{kappa(0)} = A^{kappa(1)}
  CoefficientTrack track = prev_track;
  std::vector<double> history;
  int growth = 0;
  for (int n = 1; n < cc.n_max; ++n) {
    IterationState next = solve_linear_problem(v0, b0, eps, track, M, cfg);
    next.n = n + 1;
    const double psi = contraction_metric(next, cur, track, prev_track, b0);
    if (!history.empty() && psi >= history.back() && psi >= cc.tol) {
      if (++growth >= 3)
        throw NoContraction("Psi did not decrease for 3 consecutive iterations (n=" + std::to_string(n) + ")",
                            std::size_t(n));
    } else {
      growth = 0;
    }
    history.push_back(psi);
    next.psi = history;
    cur = std::move(next);
    if (psi < cc.tol) break;
    prev_track = std::move(track);
    track = build_track(cur, cur.n);
  }
  return cur;
}

struct HalvingResult {
  IterationState state;
  double T = 0.0;
  int halvings = 0;
};

// Retries with T halved after each NoContraction.
inline HalvingResult construct_with_halving(const VectorField& v0, const VectorField& b0, double kappa, double eps,
                                            double T, const ConstructConfig& cc = {}, int max_halvings = 8) {
  for (int h = 0;; ++h) {
    try {
      return {fixed_point_construct(v0, b0, kappa, eps, T, cc), T, h};
    } catch (const NoContraction&) {
      if (h >= max_halvings) throw;
      T *= 0.5;
    }
  }
}

}  // namespace mhdl
