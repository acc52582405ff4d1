#pragma once

// CSV and JSON emitters. Numbers carry 9 significant digits and JSON keys
// are sorted, so identical runs produce byte-identical files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "gflswing/dynamics.hpp"
#include "gflswing/io/config.hpp"
#include "gflswing/stability.hpp"

namespace gflswing::io {

inline constexpr const char* kToolVersion = "gflswing 0.1.0";

inline std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline std::string fmt_time(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8e", t);
  return buf;
}

inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t_s,vpcc_mag_V,vpcc_angle_rad,vpcc_angle_deg";
  for (const InverterConfig& inv : traj.fleet) {
    std::string label = inv.name;
    for (char& c : label) {
      if (c == ' ' || c == ',') c = '_';
    }
    for (const char* col : {"theta_cg_rad", "theta_cg_deg", "i_mag_A", "i_q_A", "v_gq_V", "limited",
                            "tripped"}) {
      out << ',' << label << '_' << col;
    }
  }
  out << '\n';
  for (const TrajectoryRecord& rec : traj.records) {
    out << fmt_time(rec.t) << ',' << fmt9(rec.v_pcc_mag) << ',' << fmt9(rec.v_pcc_angle) << ','
        << fmt9(rad2deg(rec.v_pcc_angle));
    for (const InverterSample& s : rec.inverters) {
      out << ',' << fmt9(s.theta_cg) << ',' << fmt9(rad2deg(s.theta_cg)) << ',' << fmt9(s.i_mag)
          << ',' << fmt9(s.i_q) << ',' << fmt9(s.v_gq) << ',' << (s.limited ? 1 : 0) << ','
          << (s.tripped ? 1 : 0);
    }
    out << '\n';
  }
}

inline json optional_number(const std::optional<double>& v) {
  return v ? json(round9(*v)) : json(nullptr);
}

inline json optional_string(const std::optional<std::string>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json verdict_json(const StabilityVerdict& v) {
  return {{"stable", v.stable},
          {"first_unstable", optional_string(v.first_unstable)},
          {"t_unstable_s", optional_number(v.t_unstable)},
          {"t_settled_s", optional_number(v.t_settled)},
          {"max_angle_excursion_rad", round9(v.max_angle_excursion)}};
}

inline json events_json(const Trajectory& traj) {
  json out = json::array();
  if (traj.events.empty()) return out;
  for (const auto& [label, t] : sync_loss_order(traj)) {
    for (const TripEvent& e : traj.events) {
      if (traj.fleet[e.index].name == label) {
        out.push_back({{"inverter", label}, {"t_s", round9(t)}, {"cause", to_string(e.cause)}});
      }
    }
  }
  return out;
}

inline json evaluation_json(const ClearingEvaluation& e) {
  return {{"clearing_interval_s", round9(e.clearing_interval)},
          {"stable", e.stable},
          {"first_unstable", optional_string(e.first_unstable)}};
}

inline json audit_json(const MonotonicityAudit& a) {
  json samples = json::array();
  for (const ClearingEvaluation& e : a.samples) samples.push_back(evaluation_json(e));
  return {{"samples", samples},
          {"stable_to_unstable", a.stable_to_unstable},
          {"unstable_to_stable", a.unstable_to_stable},
          {"monotone", a.monotone()}};
}

inline json cct_json(const CctResult& r) {
  json log = json::array();
  for (const ClearingEvaluation& e : r.log) log.push_back(evaluation_json(e));
  return {{"cct_s", round9(r.cct)},
          {"bracket_lo_s", round9(r.bracket_lo)},
          {"bracket_hi_s", round9(r.bracket_hi)},
          {"evaluations", r.evaluations},
          {"loss_order", r.loss_order},
          {"evaluation_log", log},
          {"monotonicity_audit", r.audit ? audit_json(*r.audit) : json(nullptr)}};
}

inline json comparison_json(const FleetComparison& c) {
  json uniform = json::array();
  for (const InverterConfig& inv : c.uniform_fleet) {
    uniform.push_back({{"name", inv.name},
                       {"s_rated_VA", round9(inv.s_rated)},
                       {"line_r_ohm", round9(inv.z_line.r())},
                       {"line_x_ohm", round9(inv.z_line.x())},
                       {"r_virtual_ohm", round9(inv.r_virtual)},
                       {"kp", round9(inv.kp)},
                       {"ki", round9(inv.ki)},
                       {"i_max_A", round9(inv.i_max)}});
  }
  return {{"cct_nonuniform_s", round9(c.cct_nonuniform)},
          {"cct_uniform_s", round9(c.cct_uniform)},
          {"delta_s", round9(c.delta)},
          {"nonuniform", cct_json(c.nonuniform)},
          {"uniform", cct_json(c.uniform)},
          {"uniform_fleet", uniform}};
}

inline json provenance_json(const RunConfig& cfg) {
  return {{"config_hash", config_hash(cfg)}, {"tool_version", kToolVersion}};
}

/// Run summary: verdict, CCT and comparison when computed, the resolved
/// configuration (defaults included) and provenance.
inline json summary_json(const RunConfig& cfg, const std::optional<StabilityVerdict>& verdict,
                         const std::optional<CctResult>& cct,
                         const std::optional<FleetComparison>& comparison,
                         const Trajectory* traj = nullptr) {
  json j;
  j["verdict"] = verdict ? verdict_json(*verdict) : json(nullptr);
  j["cct"] = cct ? cct_json(*cct) : json(nullptr);
  j["comparison"] = comparison ? comparison_json(*comparison) : json(nullptr);
  if (traj) j["events"] = events_json(*traj);
  j["config"] = to_json(cfg);
  j["provenance"] = provenance_json(cfg);
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_trajectory_csv(out, traj);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace gflswing::io
