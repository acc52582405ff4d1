#pragma once

// Implicit point-of-common-coupling voltage:
//
//   v = v_th + sum_i z_eq[i] * c_i(|v|) * e^{j theta_cg[i]},
//   c_i(m) = min(s[i] / m, cap[i])
//
// solved to a fixed point, plus the per-inverter generation voltages and
// their q-axis projections.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "gflswing/errors.hpp"
#include "gflswing/inverter.hpp"
#include "gflswing/network.hpp"
#include "gflswing/phasor.hpp"

namespace gflswing {

/// Apparent power and injection angle per inverter. `i_cap` is optional;
/// when present it clamps the injected current magnitude.
struct InjectionState {
  std::vector<double> s;         // VA, 0 for a tripped inverter
  std::vector<double> theta_cg;  // rad
  std::vector<double> i_cap;     // A, empty or one per inverter

  std::size_t size() const { return s.size(); }

  double current_magnitude(std::size_t i, double v_mag) const {
    const double raw = s[i] / v_mag;
    return i_cap.empty() ? raw : std::min(raw, i_cap[i]);
  }

  void validate() const {
    if (theta_cg.size() != s.size()) throw InvalidArgument("injection: theta_cg size mismatch");
    if (!i_cap.empty() && i_cap.size() != s.size()) {
      throw InvalidArgument("injection: i_cap size mismatch");
    }
    for (double v : s) {
      if (!(v >= 0.0)) throw InvalidArgument("injection: s must be >= 0");
    }
  }
};

struct PccSolution {
  Phasor v_pcc;
  double residual = 0.0;  // V
  int iterations = 0;
};

struct SolverOptions {
  /// Absolute tolerance in volts; <= 0 selects 1e-9 * |v_th|.
  double tol = 0.0;
  int max_iter = 100;
  double damping = 0.7;
  /// Use the previous step's |v_pcc| in the current denominator instead of
  /// solving the implicit equation.
  bool lag_mode = false;
};

inline constexpr double kDefaultRelativeTolerance = 1e-9;
inline constexpr double kZeroVoltageFraction = 1e-6;

namespace detail {

struct PccEquation {
  const TheveninEquivalent& grid;
  const EquivalentImpedanceSet& zeq;
  const InjectionState& inj;

  std::complex<double> rhs_at_magnitude(double m) const {
    std::complex<double> acc = grid.v_th.complex();
    for (std::size_t i = 0; i < inj.size(); ++i) {
      if (inj.s[i] == 0.0) continue;
      acc += zeq.z_eq[i].complex() * inj.current_magnitude(i, m) * std::polar(1.0, inj.theta_cg[i]);
    }
    return acc;
  }

  std::complex<double> rhs(std::complex<double> v) const { return rhs_at_magnitude(std::abs(v)); }

  // d(rhs)/d|v|
  std::complex<double> rhs_slope(double m) const {
    std::complex<double> acc{};
    for (std::size_t i = 0; i < inj.size(); ++i) {
      if (inj.s[i] == 0.0) continue;
      const bool capped = !inj.i_cap.empty() && inj.s[i] / m >= inj.i_cap[i];
      if (capped) continue;
      acc += zeq.z_eq[i].complex() * (-inj.s[i] / (m * m)) * std::polar(1.0, inj.theta_cg[i]);
    }
    return acc;
  }

  double residual(std::complex<double> v) const { return std::abs(v - rhs(v)); }
};

}  // namespace detail

/// Fixed-point solve seeded at v = v_th: damped iteration with a damped
/// 2-D Newton fallback on stall.
inline PccSolution solve_vpcc(const TheveninEquivalent& grid, const EquivalentImpedanceSet& zeq,
                              const InjectionState& inj, double tol, int max_iter,
                              double damping = 0.7) {
  inj.validate();
  if (zeq.z_eq.size() != inj.size()) throw InvalidArgument("solve_vpcc: z_eq size mismatch");
  if (!(tol > 0.0)) throw InvalidArgument("solve_vpcc: tol must be > 0");
  if (max_iter < 1) throw InvalidArgument("solve_vpcc: max_iter must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("solve_vpcc: damping must be in (0, 1]");

  const bool idle = std::all_of(inj.s.begin(), inj.s.end(), [](double s) { return s == 0.0; });
  const double vth_mag = grid.v_th.magnitude();
  if (idle) {
    if (vth_mag == 0.0) throw ZeroVoltage("solve_vpcc: zero source voltage and no injection");
    return {grid.v_th, 0.0, 1};
  }

  const detail::PccEquation eq{grid, zeq, inj};
  std::complex<double> v = grid.v_th.complex();
  if (vth_mag == 0.0) {
    // Bolted source: seed on the injection-only solution |v|^2 = |sum z s u|.
    const std::complex<double> w = eq.rhs_at_magnitude(1.0);
    v = std::polar(std::sqrt(std::abs(w)), std::arg(w));
  }
  const double floor = kZeroVoltageFraction * (vth_mag > 0.0 ? vth_mag : std::abs(v));

  int iterations = 0;
  double res = eq.residual(v);
  double best_res = res;
  std::complex<double> best_v = v;
  int slow = 0;
  for (; iterations < max_iter; ++iterations) {
    if (res <= tol) return {Phasor(v), res, iterations + 1};
    const std::complex<double> next = (1.0 - damping) * v + damping * eq.rhs(v);
    if (std::abs(next) < floor) throw ZeroVoltage("solve_vpcc: |v_pcc| collapsed during iteration");
    const double next_res = eq.residual(next);
    slow = next_res > 0.9 * res ? slow + 1 : 0;
    v = next;
    res = next_res;
    if (res < best_res) {
      best_res = res;
      best_v = v;
    }
    if (slow >= 5) break;
  }
  if (res <= tol) return {Phasor(v), res, iterations + 1};

  // Newton on F(x, y) = v - rhs(v).
  v = best_v;
  res = best_res;
  for (int k = 0; k < max_iter; ++k, ++iterations) {
    if (res <= tol) return {Phasor(v), res, iterations + 1};
    const double m = std::abs(v);
    const std::complex<double> f = v - eq.rhs(v);
    const std::complex<double> w = eq.rhs_slope(m);
    const double a11 = 1.0 - w.real() * v.real() / m;
    const double a12 = -w.real() * v.imag() / m;
    const double a21 = -w.imag() * v.real() / m;
    const double a22 = 1.0 - w.imag() * v.imag() / m;
    const double det = a11 * a22 - a12 * a21;
    if (det == 0.0 || !std::isfinite(det)) break;
    const std::complex<double> delta((a22 * f.real() - a12 * f.imag()) / det,
                                     (-a21 * f.real() + a11 * f.imag()) / det);
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      const std::complex<double> trial = v - step * delta;
      if (std::abs(trial) < floor) continue;
      const double trial_res = eq.residual(trial);
      if (trial_res < res) {
        v = trial;
        res = trial_res;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res <= tol) return {Phasor(v), res, iterations + 1};
  throw NonConvergence("solve_vpcc: residual above tolerance after max_iter", res, iterations);
}

inline PccSolution solve_vpcc(const TheveninEquivalent& grid, const EquivalentImpedanceSet& zeq,
                              const InjectionState& inj, const SolverOptions& opts) {
  const double tol = opts.tol > 0.0
                         ? opts.tol
                         : kDefaultRelativeTolerance * std::max(grid.v_th.magnitude(), 1.0);
  return solve_vpcc(grid, zeq, inj, tol, opts.max_iter, opts.damping);
}

/// Explicit-lag evaluation: the current denominators use |v_prev|.
inline PccSolution evaluate_vpcc_lagged(const TheveninEquivalent& grid,
                                        const EquivalentImpedanceSet& zeq,
                                        const InjectionState& inj, Phasor v_prev) {
  inj.validate();
  const double m = v_prev.magnitude();
  if (!(m > 0.0)) throw ZeroVoltage("evaluate_vpcc_lagged: previous |v_pcc| is zero");
  const detail::PccEquation eq{grid, zeq, inj};
  const std::complex<double> v = eq.rhs_at_magnitude(m);
  if (std::abs(v) == 0.0) throw ZeroVoltage("evaluate_vpcc_lagged: |v_pcc| is zero");
  return {Phasor(v), eq.residual(v), 1};
}

/// Generation voltage of inverter p behind Z_gp + Z_vp.
inline Phasor inverter_terminal_voltage(std::size_t p, Phasor v_pcc, const InverterConfig& cfg,
                                        const InjectionState& inj) {
  const double m = v_pcc.magnitude();
  if (!(m > 0.0)) throw InvalidArgument("inverter_terminal_voltage: |v_pcc| is zero");
  if (p >= inj.size()) throw InvalidArgument("inverter_terminal_voltage: index out of range");
  return v_pcc + cfg.series_impedance() * (inj.current_magnitude(p, m) * unit_phasor(inj.theta_cg[p]));
}

struct InverterOperatingPoint {
  Phasor v_g;
  double v_gq = 0.0;
  double i_mag = 0.0;
};

struct QComponents {
  double v_pcc_q = 0.0;
  std::vector<double> v_gq;
};

/// Termwise q-axis projections in the frame at `ref_angle`:
///   V_PCCq = V_thq + sum_i |z_eq[i]| c_i sin(theta_cg[i] + gamma_i - ref)
///   V_gpq  = V_PCCq + |Z_gp + Z_vp| c_p sin(theta_cg[p] + psi_p - ref)
inline QComponents q_components(const TheveninEquivalent& grid, const EquivalentImpedanceSet& zeq,
                                std::span<const InverterConfig> fleet, const InjectionState& inj,
                                Phasor v_pcc, double ref_angle) {
  const double m = v_pcc.magnitude();
  if (!(m > 0.0)) throw InvalidArgument("q_components: |v_pcc| is zero");
  QComponents out;
  out.v_pcc_q = dq_components(grid.v_th, ref_angle).q;
  for (std::size_t i = 0; i < inj.size(); ++i) {
    if (inj.s[i] == 0.0) continue;
    out.v_pcc_q += zeq.z_eq[i].magnitude() * inj.current_magnitude(i, m) *
                   std::sin(inj.theta_cg[i] + zeq.gamma[i] - ref_angle);
  }
  out.v_gq.resize(inj.size(), out.v_pcc_q);
  for (std::size_t p = 0; p < inj.size(); ++p) {
    if (inj.s[p] == 0.0) continue;
    const Impedance series = fleet[p].series_impedance();
    out.v_gq[p] += series.magnitude() * inj.current_magnitude(p, m) *
                   std::sin(inj.theta_cg[p] + series.angle() - ref_angle);
  }
  return out;
}

inline InverterOperatingPoint operating_point(std::size_t p, Phasor v_pcc, const InverterConfig& cfg,
                                              const InjectionState& inj, double ref_angle) {
  const Phasor v_g = inverter_terminal_voltage(p, v_pcc, cfg, inj);
  return {v_g, dq_components(v_g, ref_angle).q, inj.current_magnitude(p, v_pcc.magnitude())};
}

/// Aggregate short-circuit current bound sum|S_i| / |v_pcc|.
inline double total_injected_current(const InjectionState& inj, double v_pcc_mag) {
  if (!(v_pcc_mag > 0.0)) throw InvalidArgument("total_injected_current: |v_pcc| must be > 0");
  double total = 0.0;
  for (double s : inj.s) total += std::abs(s);
  return total / v_pcc_mag;
}

}  // namespace gflswing
