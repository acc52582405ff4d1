#pragma once

// Stability classification, loss-of-synchronism ordering and critical
// clearing time search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gflswing/dynamics.hpp"
#include "gflswing/errors.hpp"
#include "gflswing/fleet.hpp"
#include "gflswing/parallel.hpp"

namespace gflswing {

struct StabilityOptions {
  double settle_tol = 0.02;      // rad
  double settle_window = 1e-3;   // s
};

struct StabilityVerdict {
  bool stable = false;
  std::optional<std::string> first_unstable;
  std::optional<double> t_unstable;
  std::optional<double> t_settled;
  double max_angle_excursion = 0.0;
};

namespace detail {

// Earlier first; simultaneous events go to the larger rating.
inline bool precedes(const Fleet& fleet, std::size_t a, double ta, std::size_t b, double tb) {
  if (ta != tb) return ta < tb;
  if (fleet[a].s_rated != fleet[b].s_rated) return fleet[a].s_rated > fleet[b].s_rated;
  return a < b;
}

inline double excursion(const Trajectory& traj, const TrajectoryRecord& rec, std::size_t p) {
  return std::abs(rec.inverters[p].theta_cg - traj.theta_cg_prefault[p]);
}

inline double window_start(const Trajectory& traj, double settle_window) {
  return traj.records.back().t - settle_window - 1e-9 * traj.scenario.dt;
}

// Inverters outside the settle band in the final window, ordered by the
// first time each left the band.
inline std::vector<std::pair<std::size_t, double>> settle_violations(const Trajectory& traj,
                                                                     double settle_tol,
                                                                     double settle_window) {
  const std::size_t n = traj.fleet.size();
  const double start = window_start(traj, settle_window);
  std::vector<bool> violating(n, false);
  std::vector<std::optional<double>> first_exit(n);
  for (const TrajectoryRecord& rec : traj.records) {
    for (std::size_t p = 0; p < n; ++p) {
      if (excursion(traj, rec, p) <= settle_tol) continue;
      if (!first_exit[p]) first_exit[p] = rec.t;
      if (rec.t >= start) violating[p] = true;
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t p = 0; p < n; ++p) {
    if (violating[p]) out.emplace_back(p, *first_exit[p]);
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return precedes(traj.fleet, a.first, a.second, b.first, b.second);
  });
  return out;
}

}  // namespace detail

/// Stable iff nothing tripped, no angle moved more than pi from its
/// pre-fault value, and every angle stays within settle_tol of it over the
/// final settle_window.
inline StabilityVerdict classify(const Trajectory& traj, double settle_tol, double settle_window) {
  if (traj.records.empty()) throw InvalidArgument("classify: empty trajectory");
  if (!(settle_tol > 0.0) || !(settle_window > 0.0)) {
    throw InvalidArgument("classify: settle_tol and settle_window must be > 0");
  }
  const auto& t_clear = traj.scenario.t_clear;
  if (t_clear && traj.records.back().t < *t_clear + settle_window - 1e-9 * traj.scenario.dt) {
    throw InvalidArgument("classify: trajectory ends before the settle window is complete");
  }

  StabilityVerdict v;
  const std::size_t n = traj.fleet.size();
  for (const TrajectoryRecord& rec : traj.records) {
    for (std::size_t p = 0; p < n; ++p) {
      v.max_angle_excursion = std::max(v.max_angle_excursion, detail::excursion(traj, rec, p));
    }
  }

  if (!traj.events.empty()) {
    const TripEvent* first = &traj.events.front();
    for (const TripEvent& e : traj.events) {
      if (detail::precedes(traj.fleet, e.index, e.time, first->index, first->time)) first = &e;
    }
    v.first_unstable = traj.fleet[first->index].name;
    v.t_unstable = first->time;
    return v;
  }

  for (const TrajectoryRecord& rec : traj.records) {
    std::optional<std::size_t> diverged;
    for (std::size_t p = 0; p < n; ++p) {
      if (detail::excursion(traj, rec, p) <= kPi) continue;
      if (!diverged || traj.fleet[p].s_rated > traj.fleet[*diverged].s_rated) diverged = p;
    }
    if (diverged) {
      v.first_unstable = traj.fleet[*diverged].name;
      v.t_unstable = rec.t;
      return v;
    }
  }

  const auto violations = detail::settle_violations(traj, settle_tol, settle_window);
  if (!violations.empty()) {
    v.first_unstable = traj.fleet[violations.front().first].name;
    v.t_unstable = violations.front().second;
    return v;
  }

  v.stable = true;
  v.t_settled = traj.records.front().t;
  for (std::size_t k = 0; k < traj.records.size(); ++k) {
    for (std::size_t p = 0; p < n; ++p) {
      if (detail::excursion(traj, traj.records[k], p) > settle_tol) {
        v.t_settled = k + 1 < traj.records.size() ? traj.records[k + 1].t : traj.records[k].t;
        break;
      }
    }
  }
  return v;
}

inline StabilityVerdict classify(const Trajectory& traj, const StabilityOptions& opts = {}) {
  return classify(traj, opts.settle_tol, opts.settle_window);
}

/// Trip/divergence events by ascending time; ties go to the larger s_rated.
inline std::vector<std::pair<std::string, double>> sync_loss_order(const Trajectory& traj) {
  if (traj.events.empty()) throw EmptyOrder("sync_loss_order: no inverter tripped or diverged");
  std::vector<TripEvent> events = traj.events;
  std::sort(events.begin(), events.end(), [&](const TripEvent& a, const TripEvent& b) {
    return detail::precedes(traj.fleet, a.index, a.time, b.index, b.time);
  });
  std::vector<std::pair<std::string, double>> out;
  for (const TripEvent& e : events) out.emplace_back(traj.fleet[e.index].name, e.time);
  return out;
}

/// Labels of the inverters that made a run unstable: trip order when there
/// were trips, otherwise the order in which angles left the settle band.
inline std::vector<std::string> instability_order(const Trajectory& traj, double settle_tol,
                                                  double settle_window) {
  std::vector<std::string> out;
  if (!traj.events.empty()) {
    for (const auto& [label, t] : sync_loss_order(traj)) out.push_back(label);
    return out;
  }
  for (const auto& [p, t] : detail::settle_violations(traj, settle_tol, settle_window)) {
    out.push_back(traj.fleet[p].name);
  }
  return out;
}

struct CctOptions {
  double t_min = 0.05e-3;     // s, clearing interval expected stable
  double t_max = 8e-3;        // s, clearing interval expected unstable
  double resolution = 1e-5;   // s
  int audit_points = 5;       // 0 disables the monotonicity audit
  unsigned threads = default_thread_count();
};

struct ClearingEvaluation {
  double clearing_interval = 0.0;  // s, t_clear - t_fault
  bool stable = false;
  std::optional<std::string> first_unstable;
};

struct MonotonicityAudit {
  std::vector<ClearingEvaluation> samples;
  int stable_to_unstable = 0;
  int unstable_to_stable = 0;
  bool monotone() const { return unstable_to_stable == 0 && stable_to_unstable <= 1; }
};

struct CctResult {
  double cct = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int evaluations = 0;
  std::vector<std::string> loss_order;
  std::vector<ClearingEvaluation> log;
  std::optional<MonotonicityAudit> audit;
};

/// Raised when the supplied bracket does not straddle the stability boundary.
class BracketInvalid : public Error {
 public:
  BracketInvalid(const std::string& what, ClearingEvaluation lo, ClearingEvaluation hi)
      : Error(what), lo_(std::move(lo)), hi_(std::move(hi)) {}
  const ClearingEvaluation& lo() const noexcept { return lo_; }
  const ClearingEvaluation& hi() const noexcept { return hi_; }

 private:
  ClearingEvaluation lo_;
  ClearingEvaluation hi_;
};

/// Raised when sampled verdicts are not a single stable-to-unstable step.
class MonotonicityViolation : public Error {
 public:
  MonotonicityViolation(const std::string& what, MonotonicityAudit audit)
      : Error(what), audit_(std::move(audit)) {}
  const MonotonicityAudit& audit() const noexcept { return audit_; }

 private:
  MonotonicityAudit audit_;
};

/// Scenario with the fault cleared `clearing_steps` steps after onset and
/// long enough to cover the settle window.
inline FaultScenario clearing_scenario(const FaultScenario& base, std::int64_t clearing_steps,
                                       const StabilityOptions& stab) {
  FaultScenario sc = base;
  const std::int64_t k_clear = base.fault_step() + clearing_steps;
  const auto window_steps = static_cast<std::int64_t>(std::ceil(stab.settle_window / base.dt - 1e-9));
  const std::int64_t k_end = std::max(base.end_step(), k_clear + window_steps + 1);
  sc.t_clear = static_cast<double>(k_clear) * base.dt;
  sc.t_end = static_cast<double>(k_end) * base.dt;
  return sc;
}

inline Trajectory simulate_clearing(std::span<const InverterConfig> fleet, const GridModel& grid,
                                    const FaultScenario& base, double clearing_interval,
                                    const SimulationOptions& sim, const StabilityOptions& stab) {
  const std::int64_t steps = std::max<std::int64_t>(1, std::llround(clearing_interval / base.dt));
  return simulate(fleet, grid, clearing_scenario(base, steps, stab), sim);
}

inline ClearingEvaluation evaluate_clearing(std::span<const InverterConfig> fleet,
                                            const GridModel& grid, const FaultScenario& base,
                                            double clearing_interval, const SimulationOptions& sim,
                                            const StabilityOptions& stab) {
  const Trajectory traj = simulate_clearing(fleet, grid, base, clearing_interval, sim, stab);
  const StabilityVerdict v = classify(traj, stab);
  const double snapped =
      static_cast<double>(std::max<std::int64_t>(1, std::llround(clearing_interval / base.dt))) * base.dt;
  return {snapped, v.stable, v.first_unstable};
}

inline MonotonicityAudit audit_monotonicity(std::span<const InverterConfig> fleet,
                                            const GridModel& grid, const FaultScenario& base,
                                            double t_min, double t_max, int points,
                                            const SimulationOptions& sim,
                                            const StabilityOptions& stab,
                                            unsigned threads = default_thread_count()) {
  if (points < 2) throw InvalidArgument("audit_monotonicity: need at least 2 points");
  MonotonicityAudit audit;
  audit.samples.resize(static_cast<std::size_t>(points));
  parallel_for(audit.samples.size(), [&](std::size_t j) {
    const double tau = t_min + (t_max - t_min) * static_cast<double>(j) / (points - 1);
    audit.samples[j] = evaluate_clearing(fleet, grid, base, tau, sim, stab);
  }, threads);
  for (std::size_t j = 1; j < audit.samples.size(); ++j) {
    const bool a = audit.samples[j - 1].stable;
    const bool b = audit.samples[j].stable;
    if (a && !b) ++audit.stable_to_unstable;
    if (!a && b) ++audit.unstable_to_stable;
  }
  return audit;
}

/// Bisection on the clearing interval, in whole simulation steps, until the
/// bracket is no wider than `resolution`. Assumes stability is monotone in
/// clearing time; the optional audit checks that assumption.
inline CctResult find_cct(std::span<const InverterConfig> fleet, const GridModel& grid,
                          const FaultScenario& base, const CctOptions& opts,
                          const SimulationOptions& sim = {}, const StabilityOptions& stab = {}) {
  base.validate();
  if (!(opts.resolution > 0.0)) throw InvalidArgument("find_cct: resolution must be > 0");
  if (opts.resolution < base.dt * (1.0 - 1e-9)) {
    throw InvalidArgument("find_cct: resolution finer than the simulation step");
  }
  if (!(opts.t_min > 0.0 && opts.t_min < opts.t_max)) {
    throw InvalidArgument("find_cct: require 0 < t_min < t_max");
  }
  std::int64_t lo = std::max<std::int64_t>(1, std::llround(opts.t_min / base.dt));
  std::int64_t hi = std::llround(opts.t_max / base.dt);
  if (hi <= lo) throw InvalidArgument("find_cct: bracket narrower than one step");

  CctResult result;
  auto eval = [&](std::int64_t steps) {
    ClearingEvaluation e =
        evaluate_clearing(fleet, grid, base, static_cast<double>(steps) * base.dt, sim, stab);
    result.log.push_back(e);
    ++result.evaluations;
    return e;
  };

  const ClearingEvaluation lo_eval = eval(lo);
  const ClearingEvaluation hi_eval = eval(hi);
  if (!lo_eval.stable || hi_eval.stable) {
    throw BracketInvalid(!lo_eval.stable ? "find_cct: t_min is unstable" : "find_cct: t_max is stable",
                         lo_eval, hi_eval);
  }
  if (opts.audit_points > 0) {
    result.audit = audit_monotonicity(fleet, grid, base, static_cast<double>(lo) * base.dt,
                                      static_cast<double>(hi) * base.dt,
                                      std::max(opts.audit_points, 2), sim, stab, opts.threads);
    if (!result.audit->monotone()) {
      throw MonotonicityViolation("find_cct: verdicts are not monotone in clearing time",
                                  *result.audit);
    }
  }

  const double width_limit = opts.resolution * (1.0 + 1e-9);
  while (hi - lo > 1 && static_cast<double>(hi - lo) * base.dt > width_limit) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (eval(mid).stable) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.bracket_lo = static_cast<double>(lo) * base.dt;
  result.bracket_hi = static_cast<double>(hi) * base.dt;
  result.cct = 0.5 * (result.bracket_lo + result.bracket_hi);
  const Trajectory unstable = simulate_clearing(fleet, grid, base, result.bracket_hi, sim, stab);
  result.loss_order = instability_order(unstable, stab.settle_tol, stab.settle_window);
  return result;
}

struct FleetComparison {
  CctResult nonuniform;
  CctResult uniform;
  double cct_nonuniform = 0.0;
  double cct_uniform = 0.0;
  double delta = 0.0;  // cct_uniform - cct_nonuniform
  Fleet uniform_fleet;
};

/// CCT of the fleet against its mean-preserving uniform counterpart.
inline FleetComparison compare_uniform(const Fleet& fleet, const GridModel& grid,
                                       const FaultScenario& base, const CctOptions& opts,
                                       const SimulationOptions& sim = {},
                                       const StabilityOptions& stab = {}) {
  if (fleet.size() < 2) throw InvalidArgument("compare_uniform: fleet needs at least 2 inverters");
  FleetComparison out;
  out.uniform_fleet = make_uniform_fleet(fleet);
  CctOptions inner = opts;
  inner.threads = std::max(1u, opts.threads / 2);
  parallel_for(2, [&](std::size_t which) {
    if (which == 0) {
      out.nonuniform = find_cct(fleet, grid, base, inner, sim, stab);
    } else {
      out.uniform = find_cct(out.uniform_fleet, grid, base, inner, sim, stab);
    }
  }, std::min(2u, opts.threads));
  out.cct_nonuniform = out.nonuniform.cct;
  out.cct_uniform = out.uniform.cct;
  out.delta = out.cct_uniform - out.cct_nonuniform;
  return out;
}

}  // namespace gflswing
