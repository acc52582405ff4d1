#pragma once

// Fixed-step simulation of the fleet through pre-fault, fault-on and
// post-fault intervals. Each step advances the per-inverter PLLs, re-solves
// the PCC voltage with current limiting, and evaluates trips.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gflswing/errors.hpp"
#include "gflswing/inverter.hpp"
#include "gflswing/network.hpp"
#include "gflswing/pcc.hpp"
#include "gflswing/phasor.hpp"

namespace gflswing {

/// Synchronous-frame PLL state. `theta` is the unwrapped deviation from
/// nominal rotation.
struct PllState {
  double theta = 0.0;      // rad
  double omega_dev = 0.0;  // rad/s
  double integral = 0.0;   // V s

  friend bool operator==(const PllState&, const PllState&) = default;
};

/// PI on the q-axis voltage error, integrated with one explicit step.
inline PllState pll_step(PllState state, double v_q, double kp, double ki, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("pll_step: dt must be > 0");
  state.integral += v_q * dt;
  state.omega_dev = kp * v_q + ki * state.integral;
  state.theta += state.omega_dev * dt;
  return state;
}

struct LimitedCurrent {
  double i = 0.0;
  bool limited = false;
};

inline LimitedCurrent limited_current(double s_ref, double v_pcc_mag, double i_max) {
  if (!(v_pcc_mag > 0.0)) throw InvalidArgument("limited_current: |v_pcc| must be > 0");
  const double raw = s_ref / v_pcc_mag;
  if (raw > i_max) return {i_max, true};
  return {raw, false};
}

enum class TripCause { kNone, kCurrentLimit, kAngleDivergence, kVoltageCollapse };

inline const char* to_string(TripCause c) {
  switch (c) {
    case TripCause::kNone: return "none";
    case TripCause::kCurrentLimit: return "current_limit";
    case TripCause::kAngleDivergence: return "angle_divergence";
    case TripCause::kVoltageCollapse: return "voltage_collapse";
  }
  return "unknown";
}

struct InverterState {
  PllState pll;
  double theta_cg = 0.0;  // rad, unwrapped
  double i_cmd = 0.0;     // A
  double i_q = 0.0;       // A, q projection on the v_pcc-aligned frame
  double v_gq = 0.0;      // V, q projection of v_gp on the PLL frame
  bool limited = false;
  std::optional<double> limited_since;
  bool tripped = false;
  std::optional<double> trip_time;
  TripCause trip_cause = TripCause::kNone;
};

struct FaultScenario {
  double t_fault = 0.0;
  std::optional<double> t_clear;  // none: never cleared
  double fault_depth = 0.0;
  double t_end = 0.0;
  double dt = 1e-5;

  void validate() const {
    if (!(dt > 0.0)) throw InvalidArgument("scenario: dt must be > 0");
    if (!(t_fault >= 0.0 && t_fault < t_end)) {
      throw InvalidArgument("scenario: require 0 <= t_fault < t_end");
    }
    if (t_clear && !(*t_clear > t_fault && *t_clear <= t_end)) {
      throw InvalidArgument("scenario: require t_fault < t_clear <= t_end");
    }
    if (!(fault_depth >= 0.0 && fault_depth <= 1.0)) {
      throw InvalidArgument("scenario: fault_depth must lie in [0, 1]");
    }
  }

  std::int64_t fault_step() const { return std::llround(t_fault / dt); }
  std::int64_t clear_step() const {
    return t_clear ? std::llround(*t_clear / dt) : std::numeric_limits<std::int64_t>::max();
  }
  std::int64_t end_step() const { return std::llround(t_end / dt); }
};

struct InverterSample {
  double theta_cg = 0.0;
  double i_mag = 0.0;
  double i_q = 0.0;
  double v_gq = 0.0;
  bool limited = false;
  bool tripped = false;
};

struct TrajectoryRecord {
  double t = 0.0;
  double v_pcc_mag = 0.0;
  double v_pcc_angle = 0.0;
  std::vector<InverterSample> inverters;
};

struct TripEvent {
  std::size_t index = 0;
  double time = 0.0;
  TripCause cause = TripCause::kNone;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  FaultScenario scenario;
  Fleet fleet;
  std::vector<double> theta_cg_prefault;
  std::vector<TripEvent> events;  // in order of occurrence
};

struct SimulationOptions {
  SolverOptions solver;
  /// Unwrapped |theta_cg - theta_cg,prefault| beyond which an inverter is
  /// declared out of step.
  double divergence_bound = kPi;
};

struct SimState {
  std::int64_t step_index = 0;
  double t = 0.0;
  Phasor v_pcc;
  std::vector<InverterState> inverters;
  std::vector<double> theta_cg_prefault;
};

namespace detail {

inline double solver_tol(const SolverOptions& opts, const TheveninEquivalent& grid) {
  return opts.tol > 0.0 ? opts.tol
                        : kDefaultRelativeTolerance * std::max(grid.v_th.magnitude(), 1.0);
}

inline InjectionState injections(std::span<const InverterConfig> fleet,
                                 const std::vector<InverterState>& states) {
  InjectionState inj;
  inj.s.reserve(fleet.size());
  inj.theta_cg.reserve(fleet.size());
  inj.i_cap.reserve(fleet.size());
  for (std::size_t p = 0; p < fleet.size(); ++p) {
    inj.s.push_back(states[p].tripped ? 0.0 : fleet[p].s_rated);
    inj.theta_cg.push_back(states[p].theta_cg);
    inj.i_cap.push_back(fleet[p].i_max);
  }
  return inj;
}

// Fills v_pcc, currents and q-components for the current angles. Returns
// false if the PCC equation has no solution.
inline bool observe(SimState& st, std::span<const InverterConfig> fleet,
                    const TheveninEquivalent& grid, Impedance z_load,
                    const SimulationOptions& opts, std::optional<Phasor> v_prev) {
  const InjectionState inj = injections(fleet, st.inverters);
  const bool idle = std::all_of(inj.s.begin(), inj.s.end(), [](double s) { return s == 0.0; });
  const EquivalentImpedanceSet zeq = equivalent_impedance(fleet, grid, z_load);
  if (idle) {
    st.v_pcc = grid.v_th;
  } else {
    try {
      if (opts.solver.lag_mode && v_prev && v_prev->magnitude() > 0.0) {
        st.v_pcc = evaluate_vpcc_lagged(grid, zeq, inj, *v_prev).v_pcc;
      } else {
        st.v_pcc = solve_vpcc(grid, zeq, inj, solver_tol(opts.solver, grid), opts.solver.max_iter,
                              opts.solver.damping)
                       .v_pcc;
      }
    } catch (const NonConvergence&) {
      return false;
    } catch (const ZeroVoltage&) {
      return false;
    }
  }
  const double m = st.v_pcc.magnitude();
  const double v_angle = st.v_pcc.angle();
  for (std::size_t p = 0; p < fleet.size(); ++p) {
    InverterState& inv = st.inverters[p];
    if (inv.tripped || m == 0.0) {
      inv.i_cmd = 0.0;
      inv.i_q = 0.0;
      inv.limited = false;
      inv.v_gq = m == 0.0 ? 0.0 : dq_components(st.v_pcc, inv.pll.theta).q;
      continue;
    }
    const LimitedCurrent lc = limited_current(fleet[p].s_rated, m, fleet[p].i_max);
    inv.i_cmd = lc.i;
    inv.limited = lc.limited;
    inv.i_q = lc.i * std::sin(inv.theta_cg - v_angle);
    inv.v_gq = q_components(grid, zeq, fleet, inj, st.v_pcc, inv.pll.theta).v_gq[p];
  }
  return true;
}

inline void evaluate_trips(SimState& st, std::span<const InverterConfig> fleet, double dt,
                           double divergence_bound) {
  const double eps = 1e-9 * dt;
  for (std::size_t p = 0; p < fleet.size(); ++p) {
    InverterState& inv = st.inverters[p];
    if (inv.tripped) continue;
    if (inv.limited) {
      if (!inv.limited_since) inv.limited_since = st.t;
    } else {
      inv.limited_since.reset();
    }
    TripCause cause = TripCause::kNone;
    if (inv.limited_since && st.t - *inv.limited_since >= fleet[p].trip_holdoff - eps) {
      cause = TripCause::kCurrentLimit;
    } else if (std::abs(inv.theta_cg - st.theta_cg_prefault[p]) > divergence_bound) {
      cause = TripCause::kAngleDivergence;
    }
    if (cause != TripCause::kNone) {
      inv.tripped = true;
      inv.trip_time = st.t;
      inv.trip_cause = cause;
    }
  }
}

inline void collapse(SimState& st) {
  for (InverterState& inv : st.inverters) {
    if (inv.tripped) continue;
    inv.tripped = true;
    inv.trip_time = st.t;
    inv.trip_cause = TripCause::kVoltageCollapse;
  }
}

}  // namespace detail

/// Pre-fault equilibrium: every PLL locked onto its own generation voltage
/// (v_gq = 0) with zero frequency deviation.
inline SimState initialize(std::span<const InverterConfig> fleet, const TheveninEquivalent& grid,
                           Impedance z_load, const SimulationOptions& opts = {}) {
  if (fleet.empty()) throw InvalidArgument("initialize: empty fleet");
  for (const auto& inv : fleet) inv.validate();
  SimState st;
  st.inverters.resize(fleet.size());
  const double start = grid.v_th.angle();
  for (std::size_t p = 0; p < fleet.size(); ++p) {
    st.inverters[p].pll.theta = start;
    st.inverters[p].theta_cg = start + fleet[p].pf_angle;
  }
  const EquivalentImpedanceSet zeq = equivalent_impedance(fleet, grid, z_load);
  const double tol = detail::solver_tol(opts.solver, grid);
  constexpr int kMaxSweeps = 500;
  bool locked = false;
  for (int sweep = 0; sweep < kMaxSweeps && !locked; ++sweep) {
    const InjectionState inj = detail::injections(fleet, st.inverters);
    PccSolution sol;
    try {
      sol = solve_vpcc(grid, zeq, inj, tol, opts.solver.max_iter, opts.solver.damping);
    } catch (const Error& e) {
      throw InitializationFailure(std::string("no pre-fault PCC solution: ") + e.what());
    }
    double worst = 0.0;
    for (std::size_t p = 0; p < fleet.size(); ++p) {
      const Phasor v_g = inverter_terminal_voltage(p, sol.v_pcc, fleet[p], inj);
      InverterState& inv = st.inverters[p];
      const double shift = wrap_angle(v_g.angle() - inv.pll.theta);
      worst = std::max(worst, std::abs(shift));
      inv.pll.theta += shift;
      inv.theta_cg = inv.pll.theta + fleet[p].pf_angle;
    }
    locked = worst < 1e-14;
  }
  if (!locked) throw InitializationFailure("PLL lock iteration did not converge");
  for (std::size_t p = 0; p < fleet.size(); ++p) {
    st.theta_cg_prefault.push_back(st.inverters[p].theta_cg);
  }
  if (!detail::observe(st, fleet, grid, z_load, opts, std::nullopt)) {
    throw InitializationFailure("no pre-fault PCC solution at the locked angles");
  }
  return st;
}

/// One step: PLL update from the previous q-errors, then the PCC solve and
/// trip evaluation at the new time. A solver failure is recorded as voltage
/// collapse: every running inverter trips at that step.
inline SimState step(const SimState& state, std::span<const InverterConfig> fleet,
                     const TheveninEquivalent& grid_now, Impedance z_load, double dt,
                     const SimulationOptions& opts = {}) {
  if (!(dt > 0.0)) throw InvalidArgument("step: dt must be > 0");
  SimState next = state;
  next.step_index = state.step_index + 1;
  next.t = static_cast<double>(next.step_index) * dt;
  for (std::size_t p = 0; p < fleet.size(); ++p) {
    InverterState& inv = next.inverters[p];
    if (inv.tripped) continue;
    inv.pll = pll_step(inv.pll, inv.v_gq, fleet[p].kp, fleet[p].ki, dt);
    inv.theta_cg = inv.pll.theta + fleet[p].pf_angle;
  }
  if (!detail::observe(next, fleet, grid_now, z_load, opts, state.v_pcc)) {
    detail::collapse(next);
    detail::observe(next, fleet, grid_now, z_load, opts, std::nullopt);
    return next;
  }
  detail::evaluate_trips(next, fleet, dt, opts.divergence_bound);
  return next;
}

inline TrajectoryRecord snapshot(const SimState& st) {
  TrajectoryRecord rec;
  rec.t = st.t;
  rec.v_pcc_mag = st.v_pcc.magnitude();
  rec.v_pcc_angle = st.v_pcc.angle();
  rec.inverters.reserve(st.inverters.size());
  for (const InverterState& inv : st.inverters) {
    rec.inverters.push_back({inv.theta_cg, inv.i_cmd, inv.i_q, inv.v_gq, inv.limited, inv.tripped});
  }
  return rec;
}

inline Trajectory simulate(std::span<const InverterConfig> fleet, const GridModel& grid,
                           const FaultScenario& scenario, const SimulationOptions& opts = {}) {
  scenario.validate();
  grid.validate();
  if (fleet.empty()) throw InvalidArgument("simulate: empty fleet");
  const TheveninEquivalent faulted = faulted_grid(grid, scenario.fault_depth);
  SimulationOptions run_opts = opts;
  run_opts.solver.tol = detail::solver_tol(opts.solver, grid.prefault);

  Trajectory traj;
  traj.scenario = scenario;
  traj.fleet.assign(fleet.begin(), fleet.end());

  SimState st = initialize(fleet, grid.prefault, grid.z_load, run_opts);
  traj.theta_cg_prefault = st.theta_cg_prefault;
  const std::int64_t n = scenario.end_step();
  const std::int64_t k_fault = scenario.fault_step();
  const std::int64_t k_clear = scenario.clear_step();
  traj.records.reserve(static_cast<std::size_t>(n + 1));
  traj.records.push_back(snapshot(st));
  for (std::int64_t k = 1; k <= n; ++k) {
    const bool fault_on = k >= k_fault && k < k_clear;
    const std::vector<InverterState> before = st.inverters;
    st = step(st, fleet, fault_on ? faulted : grid.prefault, grid.z_load, scenario.dt, run_opts);
    for (std::size_t p = 0; p < fleet.size(); ++p) {
      if (st.inverters[p].tripped && !before[p].tripped) {
        traj.events.push_back({p, st.t, st.inverters[p].trip_cause});
      }
    }
    traj.records.push_back(snapshot(st));
  }
  return traj;
}

}  // namespace gflswing
