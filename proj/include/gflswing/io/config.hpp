#pragma once

// Run configuration: JSON (comments allowed) with grid, fleet, scenario,
// solver and stability sections. See configs/table1.json for an annotated
// example.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gflswing/dynamics.hpp"
#include "gflswing/errors.hpp"
#include "gflswing/fleet.hpp"
#include "gflswing/network.hpp"
#include "gflswing/stability.hpp"

namespace gflswing::io {

using nlohmann::json;

struct RunConfig {
  GridModel grid;
  double v_nominal = kDefaultNominalVoltage;
  double frequency = kSystemFrequency;
  Fleet fleet;
  std::vector<bool> i_max_defaulted;
  FaultScenario scenario;
  SimulationOptions sim;
  StabilityOptions stability;
  CctOptions cct;
};

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Walks one JSON object, addressing errors by dotted path and rejecting
// unknown keys.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail(field(key), "unknown field");
    }
  }

  bool has(const std::string& key) const {
    return node_.contains(key) && !node_.at(key).is_null();
  }

  double number(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) fail(field(key), "missing required number");
    const json& v = node_.at(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    return v.get<double>();
  }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    return has(key) ? number(key) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  int integer(const std::string& key, int fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) fail(field(key), "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_boolean()) fail(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key) || !node_.at(key).is_string()) fail(field(key), "expected a string");
    return node_.at(key).get<std::string>();
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) fail(field(key), "missing required section");
    return node_.at(key);
  }

  const json* optional_child(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &node_.at(key) : nullptr;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Impedance read_impedance(const json& node, const std::string& path) {
  Section s(node, path);
  return {s.number("r"), s.number("x")};
}

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) Section::fail(path, what);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": parse error at " + detail::line_col(text, e.byte) + ": " + e.what());
  }

  using detail::require;
  using detail::Section;
  RunConfig cfg;
  Section top(root, "");

  {
    Section g(top.child("grid"), "grid");
    cfg.v_nominal = g.number("v_nominal_V", kDefaultNominalVoltage);
    require(cfg.v_nominal > 0.0, "grid.v_nominal_V", "must be > 0");
    cfg.frequency = g.number("frequency_Hz", kSystemFrequency);
    require(cfg.frequency > 0.0, "grid.frequency_Hz", "must be > 0");
    const double v_th = g.number("v_th_V");
    require(v_th > 0.0, "grid.v_th_V", "must be > 0");
    cfg.grid.prefault.v_th = from_polar(v_th, g.number("v_th_angle_rad", 0.0));
    cfg.grid.prefault.z_th = detail::read_impedance(g.child("z_th_ohm"), "grid.z_th_ohm");
    require(cfg.grid.prefault.z_th.r() >= 0.0, "grid.z_th_ohm.r", "must be >= 0");
    cfg.grid.z_load = detail::read_impedance(g.child("z_load_ohm"), "grid.z_load_ohm");
    require((cfg.grid.prefault.z_th + cfg.grid.z_load).magnitude() > 0.0, "grid.z_load_ohm",
            "z_th + z_load must be non-zero");
    if (const json* f = g.optional_child("fault_override")) {
      Section fo(*f, "grid.fault_override");
      if (auto mag = fo.optional_number("v_th_V")) {
        require(*mag >= 0.0 && *mag <= v_th, "grid.fault_override.v_th_V",
                "must lie in [0, grid.v_th_V]");
        cfg.grid.fault_override.v_th = from_polar(*mag, fo.number("v_th_angle_rad", 0.0));
      }
      if (const json* z = fo.optional_child("z_th_ohm")) {
        cfg.grid.fault_override.z_th = detail::read_impedance(*z, "grid.fault_override.z_th_ohm");
        require(cfg.grid.fault_override.z_th->r() >= 0.0, "grid.fault_override.z_th_ohm.r",
                "must be >= 0");
      }
    }
  }

  {
    const json& fleet = top.child("fleet");
    require(fleet.is_array() && !fleet.empty(), "fleet", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
      const std::string path = "fleet[" + std::to_string(i) + "]";
      Section f(fleet[i], path);
      InverterConfig inv;
      inv.name = f.string("name");
      require(!inv.name.empty() && names.insert(inv.name).second, path + ".name",
              "must be non-empty and unique");
      inv.s_rated = f.number("s_rated_VA");
      require(inv.s_rated > 0.0, path + ".s_rated_VA", "must be > 0");
      const double r = f.number("line_r_ohm");
      require(r >= 0.0, path + ".line_r_ohm", "must be >= 0");
      const double l_uh = f.number("line_l_uH");
      require(l_uh >= 0.0, path + ".line_l_uH", "must be >= 0");
      inv.z_line = line_impedance(r, l_uh * 1e-6, cfg.frequency);
      inv.r_virtual = f.number("r_virtual_ohm", 0.0);
      require(inv.r_virtual >= 0.0, path + ".r_virtual_ohm", "must be >= 0");
      inv.kp = f.number("kp");
      require(inv.kp >= 0.0, path + ".kp", "must be >= 0");
      inv.ki = f.number("ki");
      require(inv.ki >= 0.0, path + ".ki", "must be >= 0");
      const std::optional<double> i_max = f.optional_number("i_max_A");
      inv.i_max = i_max ? *i_max : default_current_limit(inv.s_rated, cfg.v_nominal);
      require(inv.i_max > 0.0, path + ".i_max_A", "must be > 0");
      inv.pf_angle = f.number("pf_angle_rad", 0.0);
      inv.trip_holdoff = f.number("trip_holdoff_s", kDefaultTripHoldoff);
      require(inv.trip_holdoff >= 0.0, path + ".trip_holdoff_s", "must be >= 0");
      require((inv.series_impedance() + cfg.grid.prefault.z_th + cfg.grid.z_load).magnitude() > 1e-12,
              path, "series impedance and feeder form a degenerate parallel pair");
      cfg.fleet.push_back(inv);
      cfg.i_max_defaulted.push_back(!i_max.has_value());
    }
  }

  {
    Section s(top.child("scenario"), "scenario");
    FaultScenario& sc = cfg.scenario;
    sc.dt = s.number("dt_s", 1e-5);
    require(sc.dt > 0.0, "scenario.dt_s", "must be > 0");
    sc.t_end = s.number("t_end_s");
    require(sc.t_end > 0.0, "scenario.t_end_s", "must be > 0");
    sc.t_fault = s.number("t_fault_s");
    require(sc.t_fault >= 0.0 && sc.t_fault < sc.t_end, "scenario.t_fault_s",
            "must satisfy 0 <= t_fault_s < t_end_s");
    sc.t_clear = s.optional_number("t_clear_s");
    require(!sc.t_clear || (*sc.t_clear > sc.t_fault && *sc.t_clear <= sc.t_end), "scenario.t_clear_s",
            "must satisfy t_fault_s < t_clear_s <= t_end_s");
    sc.fault_depth = s.number("fault_depth");
    require(sc.fault_depth >= 0.0 && sc.fault_depth <= 1.0, "scenario.fault_depth",
            "must lie in [0, 1]");
  }

  if (const json* node = top.optional_child("solver")) {
    Section s(*node, "solver");
    cfg.sim.solver.tol = s.number("tol_V", 0.0);
    require(cfg.sim.solver.tol >= 0.0, "solver.tol_V", "must be >= 0 (0 selects 1e-9 |v_th|)");
    cfg.sim.solver.max_iter = s.integer("max_iter", 100);
    require(cfg.sim.solver.max_iter >= 1, "solver.max_iter", "must be >= 1");
    cfg.sim.solver.damping = s.number("damping", 0.7);
    require(cfg.sim.solver.damping > 0.0 && cfg.sim.solver.damping <= 1.0, "solver.damping",
            "must lie in (0, 1]");
    cfg.sim.solver.lag_mode = s.boolean("lag_mode", false);
    cfg.sim.divergence_bound = s.number("divergence_bound_rad", kPi);
    require(cfg.sim.divergence_bound > 0.0, "solver.divergence_bound_rad", "must be > 0");
  }

  if (const json* node = top.optional_child("stability")) {
    Section s(*node, "stability");
    cfg.stability.settle_tol = s.number("settle_tol_rad", 0.02);
    require(cfg.stability.settle_tol > 0.0, "stability.settle_tol_rad", "must be > 0");
    cfg.stability.settle_window = s.number("settle_window_s", 1e-3);
    require(cfg.stability.settle_window > 0.0, "stability.settle_window_s", "must be > 0");
    if (const json* c = s.optional_child("cct")) {
      Section cs(*c, "stability.cct");
      cfg.cct.t_min = cs.number("t_min_s", cfg.cct.t_min);
      cfg.cct.t_max = cs.number("t_max_s", cfg.cct.t_max);
      require(cfg.cct.t_min > 0.0 && cfg.cct.t_min < cfg.cct.t_max, "stability.cct",
              "must satisfy 0 < t_min_s < t_max_s");
      cfg.cct.resolution = cs.number("resolution_s", cfg.cct.resolution);
      require(cfg.cct.resolution >= cfg.scenario.dt * (1.0 - 1e-9), "stability.cct.resolution_s",
              "must be >= scenario.dt_s");
      cfg.cct.audit_points = cs.integer("audit_points", cfg.cct.audit_points);
      require(cfg.cct.audit_points == 0 || cfg.cct.audit_points >= 5, "stability.cct.audit_points",
              "must be 0 (disabled) or >= 5");
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

/// Rounds to 9 significant digits so emitted numbers are reproducible.
inline double round9(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline json impedance_json(Impedance z) { return {{"r", round9(z.r())}, {"x", round9(z.x())}}; }

/// Fully resolved configuration, defaults included. Key order is sorted, so
/// the dump is canonical.
inline json to_json(const RunConfig& cfg) {
  json j;
  json& g = j["grid"];
  g["v_th_V"] = round9(cfg.grid.prefault.v_th.magnitude());
  g["v_th_angle_rad"] = round9(cfg.grid.prefault.v_th.angle());
  g["z_th_ohm"] = impedance_json(cfg.grid.prefault.z_th);
  g["z_load_ohm"] = impedance_json(cfg.grid.z_load);
  g["v_nominal_V"] = round9(cfg.v_nominal);
  g["frequency_Hz"] = round9(cfg.frequency);
  if (cfg.grid.fault_override.v_th || cfg.grid.fault_override.z_th) {
    json& fo = g["fault_override"];
    if (cfg.grid.fault_override.v_th) {
      fo["v_th_V"] = round9(cfg.grid.fault_override.v_th->magnitude());
      fo["v_th_angle_rad"] = round9(cfg.grid.fault_override.v_th->angle());
    }
    if (cfg.grid.fault_override.z_th) fo["z_th_ohm"] = impedance_json(*cfg.grid.fault_override.z_th);
  }
  json fleet = json::array();
  for (std::size_t i = 0; i < cfg.fleet.size(); ++i) {
    const InverterConfig& inv = cfg.fleet[i];
    fleet.push_back({{"name", inv.name},
                     {"s_rated_VA", round9(inv.s_rated)},
                     {"line_r_ohm", round9(inv.z_line.r())},
                     {"line_x_ohm", round9(inv.z_line.x())},
                     {"r_virtual_ohm", round9(inv.r_virtual)},
                     {"kp", round9(inv.kp)},
                     {"ki", round9(inv.ki)},
                     {"i_max_A", round9(inv.i_max)},
                     {"i_max_defaulted", i < cfg.i_max_defaulted.size() && cfg.i_max_defaulted[i]},
                     {"pf_angle_rad", round9(inv.pf_angle)},
                     {"trip_holdoff_s", round9(inv.trip_holdoff)}});
  }
  j["fleet"] = fleet;
  json& sc = j["scenario"];
  sc["t_fault_s"] = round9(cfg.scenario.t_fault);
  sc["t_clear_s"] = cfg.scenario.t_clear ? json(round9(*cfg.scenario.t_clear)) : json(nullptr);
  sc["fault_depth"] = round9(cfg.scenario.fault_depth);
  sc["t_end_s"] = round9(cfg.scenario.t_end);
  sc["dt_s"] = round9(cfg.scenario.dt);
  json& so = j["solver"];
  so["tol_V"] = round9(cfg.sim.solver.tol);
  so["max_iter"] = cfg.sim.solver.max_iter;
  so["damping"] = round9(cfg.sim.solver.damping);
  so["lag_mode"] = cfg.sim.solver.lag_mode;
  so["divergence_bound_rad"] = round9(cfg.sim.divergence_bound);
  json& st = j["stability"];
  st["settle_tol_rad"] = round9(cfg.stability.settle_tol);
  st["settle_window_s"] = round9(cfg.stability.settle_window);
  st["cct"] = {{"t_min_s", round9(cfg.cct.t_min)},
               {"t_max_s", round9(cfg.cct.t_max)},
               {"resolution_s", round9(cfg.cct.resolution)},
               {"audit_points", cfg.cct.audit_points}};
  return j;
}

/// FNV-1a 64 of the canonical resolved configuration, as 16 hex digits.
inline std::string config_hash(const RunConfig& cfg) {
  const std::string canonical = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gflswing::io
