#pragma once

// Cartesian parameter sweeps. A cell with a clearing-interval axis runs one
// simulation and classifies it; any other cell runs a CCT search.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gflswing/io/config.hpp"
#include "gflswing/io/report.hpp"
#include "gflswing/parallel.hpp"
#include "gflswing/stability.hpp"

namespace gflswing::io {

enum class SweepParameter { kFaultDepth, kClearingInterval, kSRatedScale, kXrScale };

inline const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::kFaultDepth: return "fault_depth";
    case SweepParameter::kClearingInterval: return "clearing_interval_s";
    case SweepParameter::kSRatedScale: return "s_rated_scale";
    case SweepParameter::kXrScale: return "xr_scale";
  }
  return "unknown";
}

struct SweepAxis {
  SweepParameter parameter = SweepParameter::kFaultDepth;
  std::optional<std::string> inverter;  // scale axes only; none = every inverter
  std::vector<double> values;

  std::string column() const {
    std::string c = to_string(parameter);
    if (inverter) {
      std::string label = *inverter;
      for (char& ch : label) {
        if (ch == ' ' || ch == ',') ch = '_';
      }
      c += "[" + label + "]";
    }
    return c;
  }
};

struct SweepSpec {
  std::vector<SweepAxis> axes;
  std::size_t cells() const {
    std::size_t n = 1;
    for (const SweepAxis& a : axes) n *= a.values.size();
    return n;
  }
};

struct SweepRow {
  std::size_t cell = 0;
  std::vector<double> values;
  std::string mode;  // "simulate" or "cct"
  std::optional<StabilityVerdict> verdict;
  std::optional<CctResult> cct;
  std::string error;
};

/// Parses {"axes": [{"parameter": ..., "inverter": ..., "values": [...]}]}.
/// A range {"start", "stop", "count"} may replace "values".
inline SweepSpec parse_sweep(const std::string& text, const std::string& source = "<sweep>") {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": parse error at " + detail::line_col(text, e.byte) + ": " + e.what());
  }
  SweepSpec spec;
  detail::Section top(root, "");
  const json* axes = top.optional_child("axes");
  if (!axes) return spec;
  detail::require(axes->is_array(), "axes", "expected an array");
  for (std::size_t i = 0; i < axes->size(); ++i) {
    const std::string path = "axes[" + std::to_string(i) + "]";
    detail::Section a((*axes)[i], path);
    SweepAxis axis;
    const std::string name = a.string("parameter");
    if (name == "fault_depth") {
      axis.parameter = SweepParameter::kFaultDepth;
    } else if (name == "clearing_interval_s") {
      axis.parameter = SweepParameter::kClearingInterval;
    } else if (name == "s_rated_scale") {
      axis.parameter = SweepParameter::kSRatedScale;
    } else if (name == "xr_scale") {
      axis.parameter = SweepParameter::kXrScale;
    } else {
      detail::Section::fail(path + ".parameter",
                            "expected fault_depth, clearing_interval_s, s_rated_scale or xr_scale");
    }
    if (a.has("inverter")) {
      detail::require(axis.parameter == SweepParameter::kSRatedScale ||
                          axis.parameter == SweepParameter::kXrScale,
                      path + ".inverter", "only valid for s_rated_scale and xr_scale");
      axis.inverter = a.string("inverter");
    }
    if (const json* values = a.optional_child("values")) {
      detail::require(values->is_array(), path + ".values", "expected an array of numbers");
      for (const json& v : *values) {
        detail::require(v.is_number(), path + ".values", "expected an array of numbers");
        axis.values.push_back(v.get<double>());
      }
    } else {
      const double start = a.number("start");
      const double stop = a.number("stop");
      const int count = a.integer("count", 0);
      detail::require(count >= 1, path + ".count", "must be >= 1");
      for (int k = 0; k < count; ++k) {
        axis.values.push_back(count == 1 ? start : start + (stop - start) * k / (count - 1));
      }
    }
    detail::require(!axis.values.empty(), path + ".values", "must not be empty");
    for (std::size_t j = i; j-- > 0;) {
      detail::require(spec.axes[j].parameter != axis.parameter || spec.axes[j].inverter != axis.inverter,
                      path, "duplicates an earlier axis");
    }
    spec.axes.push_back(std::move(axis));
  }
  return spec;
}

inline SweepSpec load_sweep(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sweep(buf.str(), path.string());
}

inline std::vector<double> cell_values(const SweepSpec& spec, std::size_t cell) {
  std::vector<double> out(spec.axes.size());
  for (std::size_t a = spec.axes.size(); a-- > 0;) {
    const std::size_t n = spec.axes[a].values.size();
    out[a] = spec.axes[a].values[cell % n];
    cell /= n;
  }
  return out;
}

namespace detail {

inline std::size_t inverter_index(const RunConfig& cfg, const std::string& name) {
  for (std::size_t p = 0; p < cfg.fleet.size(); ++p) {
    if (cfg.fleet[p].name == name) return p;
  }
  throw ConfigError("sweep: unknown inverter '" + name + "'");
}

inline void apply_scale(RunConfig& cfg, const SweepAxis& axis, double value) {
  if (!(value > 0.0)) throw InvalidArgument(std::string(to_string(axis.parameter)) + " must be > 0");
  for (std::size_t p = 0; p < cfg.fleet.size(); ++p) {
    if (axis.inverter && p != inverter_index(cfg, *axis.inverter)) continue;
    InverterConfig& inv = cfg.fleet[p];
    if (axis.parameter == SweepParameter::kSRatedScale) {
      inv.s_rated *= value;
      if (cfg.i_max_defaulted[p]) inv.i_max = default_current_limit(inv.s_rated, cfg.v_nominal);
    } else {
      inv.z_line = Impedance(inv.z_line.r(), inv.z_line.x() * value);
    }
  }
}

}  // namespace detail

inline SweepRow run_sweep_cell(const RunConfig& base, const SweepSpec& spec, std::size_t cell) {
  SweepRow row;
  row.cell = cell;
  row.values = cell_values(spec, cell);
  std::optional<double> clearing;
  for (const SweepAxis& a : spec.axes) {
    if (a.parameter == SweepParameter::kClearingInterval) clearing = 0.0;
  }
  row.mode = clearing ? "simulate" : "cct";
  try {
    RunConfig cfg = base;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const SweepAxis& axis = spec.axes[a];
      const double v = row.values[a];
      switch (axis.parameter) {
        case SweepParameter::kFaultDepth: cfg.scenario.fault_depth = v; break;
        case SweepParameter::kClearingInterval: clearing = v; break;
        default: detail::apply_scale(cfg, axis, v);
      }
    }
    if (clearing) {
      if (!(*clearing > 0.0)) throw InvalidArgument("clearing_interval_s must be > 0");
      const Trajectory traj = simulate_clearing(cfg.fleet, cfg.grid, cfg.scenario, *clearing, cfg.sim,
                                                cfg.stability);
      row.verdict = classify(traj, cfg.stability);
    } else {
      CctOptions opts = cfg.cct;
      opts.threads = 1;
      row.cct = find_cct(cfg.fleet, cfg.grid, cfg.scenario, opts, cfg.sim, cfg.stability);
    }
  } catch (const BracketInvalid& e) {
    row.error = std::string("BracketInvalid: ") + e.what() + " (t_min " +
                (e.lo().stable ? "stable" : "unstable") + ", t_max " +
                (e.hi().stable ? "stable" : "unstable") + ")";
  } catch (const MonotonicityViolation& e) {
    row.error = std::string("MonotonicityViolation: ") + e.what();
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<SweepRow> run_sweep(const RunConfig& cfg, const SweepSpec& spec,
                                       unsigned threads = default_thread_count()) {
  std::vector<SweepRow> rows(spec.cells());
  parallel_for(rows.size(), [&](std::size_t c) { rows[c] = run_sweep_cell(cfg, spec, c); }, threads);
  return rows;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline void write_sweep_csv(std::ostream& out, const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  out << "cell";
  for (const SweepAxis& a : spec.axes) out << ',' << a.column();
  out << ",mode,status,verdict,first_unstable,t_unstable_s,cct_s,bracket_lo_s,bracket_hi_s,evaluations,"
         "loss_order,error\n";
  for (const SweepRow& r : rows) {
    out << r.cell;
    for (double v : r.values) out << ',' << fmt9(v);
    out << ',' << r.mode << ',' << (r.error.empty() ? "ok" : "error") << ',';
    std::optional<std::string> first;
    std::optional<double> t_unstable;
    if (r.verdict) {
      out << (r.verdict->stable ? "stable" : "unstable");
      first = r.verdict->first_unstable;
      t_unstable = r.verdict->t_unstable;
    }
    out << ',' << csv_field(first.value_or("")) << ',' << (t_unstable ? fmt_time(*t_unstable) : "");
    if (r.cct) {
      std::string order;
      for (const std::string& s : r.cct->loss_order) order += (order.empty() ? "" : ";") + s;
      out << ',' << fmt_time(r.cct->cct) << ',' << fmt_time(r.cct->bracket_lo) << ','
          << fmt_time(r.cct->bracket_hi) << ',' << r.cct->evaluations << ',' << csv_field(order);
    } else {
      out << ",,,,,";
    }
    out << ',' << csv_field(r.error) << '\n';
  }
}

}  // namespace gflswing::io
