#pragma once

// Run orchestration behind the command line tool: a single run with series
// and snapshot output, parameter studies and the lemma report.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mhdl/config.hpp"
#include "mhdl/diagnostics.hpp"
#include "mhdl/dynamics.hpp"
#include "mhdl/io.hpp"
#include "mhdl/presets.hpp"

namespace mhdl {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_taylor = 2, exit_solver = 3 };

inline StepperConfig stepper_config(const RunConfig& c) {
  StepperConfig s;
  s.dt = c.dt;
  s.scheme = c.scheme == "euler" ? Scheme::euler : Scheme::rk4;
  s.monitor_taylor = c.monitor_taylor;
  s.enforce_bands = c.monitor_bands;
  s.pressure = c.pressure == "flux" ? PressureForm::flux : PressureForm::compatible;
  return s;
}

struct RunResult {
  int exit_code = exit_ok;
  FlowState final_state;
  double lambda = 0.0;  // Taylor floor used by the monitor
  double energy0 = 0.0;
  double energy_max = 0.0;
  double t_abort = -1.0;
  std::string message;
};

namespace detail {

inline SeriesRow series_row(const FlowState& s, const StepperConfig& cfg, const RunConfig& rc, int iterations,
                            double wall_ms) {
  InvariantOptions io;
  io.lambda = cfg.lambda;
  io.monitor_taylor = cfg.monitor_taylor;
  return {s.t, energy(s, cfg), invariants(s, io, cfg), iterations, rc.wall_clock ? wall_ms : 0.0};
}

inline std::string snapshot_path(const RunConfig& c, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%06d.mhdl", step);
  return c.snapshot + buf;
}

inline FlowState initial_state(const RunConfig& c) {
  const InitialData d = make_preset(c.preset, c.grid, c.preset_params());
  return FlowState::initial(d.v0, d.b0, c.kappa, c.epsilon);
}

}  // namespace detail

// Nonlinear kappa-problem from the configured preset, or the constructive
// eps-kappa iteration when mode = constructive. The Taylor floor is the
// configured lambda, or min(-grad q0 . N) measured at t = 0 when negative;
// a negative measured floor is reported as a violation at t = 0.
inline RunResult run(const RunConfig& c, std::ostream& log) {
  RunResult res;
  double t_now = 0.0;
  try {
    if (!c.series.empty()) std::filesystem::remove(c.series);
    StepperConfig cfg = stepper_config(c);
    FlowState s = detail::initial_state(c);
    s = with_pressure(s, cfg);
    const double measured = taylor_min(s.q);
    cfg.lambda = c.lambda >= 0 ? c.lambda : std::max(measured, 0.0);
    res.lambda = cfg.lambda;
    if (c.monitor_taylor && !(measured >= 0.5 * cfg.lambda && measured >= 0.0))
      throw TaylorViolation(0.0, measured, 0.5 * cfg.lambda);

    auto record = [&](const FlowState& st, int step, int iters, double ms) {
      const SeriesRow row = detail::series_row(st, cfg, c, iters, ms);
      if (step == 0) res.energy0 = row.energy.total;
      res.energy_max = std::max(res.energy_max, row.energy.total);
      if (!c.series.empty()) append_series(row, c.series);
      if (!c.snapshot.empty() && c.snapshot_every > 0 && step % c.snapshot_every == 0)
        write_snapshot(st, detail::snapshot_path(c, step));
    };

    if (c.mode == RunMode::constructive) {
      ConstructConfig cc;
      cc.stepper = cfg;
      const IterationState it = fixed_point_construct(s.v, s.b0, c.kappa, c.epsilon, c.T, cc);
      for (std::size_t m = 0; m < it.times.size(); ++m) {
        FlowState st = s;
        st.t = it.times[m];
        st.eta = it.eta[m];
        st.v = it.v[m];
        st.q = it.q[m];
        st.b = pullback_field(s.b0, st.eta);
        t_now = st.t;
        record(st, int(m), 0, 0.0);
        s = std::move(st);
      }
      log << "constructive run: " << it.psi.size() << " iterations, Psi = " << format_double(it.psi.back()) << "\n";
    } else {
      Stepper stepper(cfg);
      record(s, 0, 0, 0.0);
      const int n = c.steps();
      for (int k = 1; k <= n; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        s = stepper.step(s);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        t_now = s.t;
        record(s, k, stepper.last_iterations(), ms);
      }
    }
    res.final_state = std::move(s);
    log << "completed t=" << format_double(res.final_state.t) << " energy " << format_double(res.energy0) << " -> "
        << format_double(res.energy_max) << " (max)\n";
  } catch (const TaylorViolation& e) {
    res.exit_code = exit_taylor;
    res.t_abort = e.t();
    res.message = e.what();
  } catch (const ConfigError& e) {
    res.exit_code = exit_config;
    res.message = e.what();
  } catch (const std::invalid_argument& e) {
    res.exit_code = exit_config;
    res.message = e.what();
  } catch (const Error& e) {
    res.exit_code = exit_solver;
    res.t_abort = t_now;
    res.message = e.what();
  }
  if (res.exit_code != exit_ok) {
    log << "aborted";
    if (res.t_abort >= 0) log << " at t=" << format_double(res.t_abort);
    log << ": " << res.message << "\n";
  }
  return res;
}

// ---------------------------------------------------------------------------
// Studies

struct StudyRow {
  std::string quantity;
  double param = 0.0;
  double value = 0.0;  // difference to the next level, or Psi
  double ratio = 0.0;  // value / next value, or Psi ratio
  double order = 0.0;  // log2 of ratio where meaningful
};

namespace detail {

inline FlowState run_to_T(const RunConfig& c, double dt, double kappa) {
  StepperConfig cfg = stepper_config(c);
  cfg.dt = dt;
  cfg.monitor_taylor = false;
  RunConfig cc = c;
  cc.kappa = kappa;
  FlowState s = with_pressure(initial_state(cc), cfg);
  Stepper st(cfg);
  const int n = int(std::lround(c.T / dt));
  for (int k = 0; k < n; ++k) s = st.step(s);
  return s;
}

inline void fill_ratios(std::vector<StudyRow>& rows) {
  for (std::size_t k = 0; k + 1 < rows.size(); ++k)
    if (rows[k + 1].value > 0) {
      rows[k].ratio = rows[k].value / rows[k + 1].value;
      rows[k].order = std::log2(rows[k].ratio);
    }
}

}  // namespace detail

// dt-convergence: differences of successive dt-halvings; the orders are
// log2 of consecutive difference ratios (Richardson).
// kappa-sweep: |eta_kappa - eta_kappa/2|_2 at T over kappa, kappa/2, ...
// eps-sweep: constructive |eta_eps - eta_eps/2|_2 at T.
// contraction: Psi^(n) of the fixed-point iteration, with T-halving.
inline std::vector<StudyRow> study(const std::string& kind, const RunConfig& c, std::ostream& log) {
  std::vector<StudyRow> rows;
  const int L = c.levels - 1;  // levels parameter values, L differences
  if (kind == "dt-convergence") {
    std::vector<FlowState> s;
    for (int l = 0; l <= L; ++l) s.push_back(detail::run_to_T(c, c.dt / std::pow(2.0, l), c.kappa));
    for (const char* q : {"eta", "v"}) {
      std::vector<StudyRow> part;
      for (int l = 0; l < L; ++l) {
        const double d = q[0] == 'e' ? l2_norm(s[l].eta.displacement - s[l + 1].eta.displacement)
                                     : l2_norm(s[l].v - s[l + 1].v);
        part.push_back({q, c.dt / std::pow(2.0, l), d, 0.0, 0.0});
      }
      detail::fill_ratios(part);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  } else if (kind == "kappa-sweep") {
    std::vector<FlowState> s;
    for (int l = 0; l <= L; ++l) s.push_back(detail::run_to_T(c, c.dt, c.kappa / std::pow(2.0, l)));
    for (int l = 0; l < L; ++l)
      rows.push_back({"eta_h2", c.kappa / std::pow(2.0, l),
                      volume_norm(s[l].eta.displacement - s[l + 1].eta.displacement, 2), 0.0, 0.0});
    detail::fill_ratios(rows);
  } else if (kind == "eps-sweep") {
    if (!(c.epsilon > 0)) throw ConfigError("eps-sweep needs epsilon > 0", 0, 0);
    ConstructConfig cc;
    cc.stepper = stepper_config(c);
    const FlowState s0 = detail::initial_state(c);
    std::vector<FlowMap> eta;
    for (int l = 0; l <= L; ++l)
      eta.push_back(fixed_point_construct(s0.v, s0.b0, c.kappa, c.epsilon / std::pow(2.0, l), c.T, cc).eta.back());
    for (int l = 0; l < L; ++l)
      rows.push_back({"eta_h2", c.epsilon / std::pow(2.0, l),
                      volume_norm(eta[l].displacement - eta[l + 1].displacement, 2), 0.0, 0.0});
    detail::fill_ratios(rows);
  } else if (kind == "contraction") {
    ConstructConfig cc;
    cc.stepper = stepper_config(c);
    const FlowState s0 = detail::initial_state(c);
    const HalvingResult h = construct_with_halving(s0.v, s0.b0, c.kappa, c.epsilon, c.T, cc);
    log << "contraction: T=" << format_double(h.T) << " after " << h.halvings << " halvings\n";
    const auto& psi = h.state.psi;
    for (std::size_t n = 0; n < psi.size(); ++n)
      rows.push_back({"psi", double(n + 1), psi[n], n > 0 && psi[n - 1] > 0 ? psi[n] / psi[n - 1] : 0.0, 0.0});
    rows.push_back({"T_final", double(h.halvings), h.T, 0.0, 0.0});
  } else {
    throw ConfigError("unknown study kind '" + kind + "'", 0, 0);
  }
  return rows;
}

inline void write_study(const std::vector<StudyRow>& rows, const std::string& kind, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "study,quantity,param,value,ratio,order\n";
  for (const auto& r : rows)
    out << kind << "," << r.quantity << "," << format_double(r.param) << "," << format_double(r.value) << ","
        << format_double(r.ratio) << "," << format_double(r.order) << "\n";
}

// ---------------------------------------------------------------------------
// Lemma report

inline std::vector<std::string> selected_lemmas(const std::string& list) {
  if (list == "all") return lemma_ids();
  std::vector<std::string> out;
  std::stringstream ss(list);
  for (std::string id; std::getline(ss, id, ',');) {
    if (std::find(lemma_ids().begin(), lemma_ids().end(), id) == lemma_ids().end())
      throw ConfigError("unknown lemma '" + id + "'", 0, 0);
    out.push_back(id);
  }
  return out;
}

// Each lemma on the configured grid and its refinement in every direction, at
// kappa, kappa/2 and kappa/4, with the same seed throughout.
inline std::vector<LemmaCheck> lemma_report(const RunConfig& c, const std::filesystem::path& path) {
  std::vector<LemmaCheck> out;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "lemma_id,kappa,n1,n2,n3,samples,ratio\n";
  for (const auto& id : selected_lemmas(c.lemmas))
    for (int refine = 0; refine < 2; ++refine)
      for (int l = 0; l < 3; ++l) {
        LemmaConfig lc;
        lc.grid = c.grid;
        lc.grid.n1 <<= refine;
        lc.grid.n2 <<= refine;
        lc.grid.n3 <<= refine;
        lc.kappa = c.kappa / std::pow(2.0, l);
        lc.seed = c.seed;
        const LemmaCheck r = lemma_harness(id, c.samples, lc);
        f << id << "," << format_double(lc.kappa) << "," << lc.grid.n1 << "," << lc.grid.n2 << "," << lc.grid.n3
          << "," << r.sample_count << "," << format_double(r.empirical_ratio) << "\n";
        out.push_back(r);
      }
  return out;
}

}  // namespace mhdl
