// Command-line front end: simulate, cct, compare, sweep, validate.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gflswing/io/config.hpp"
#include "gflswing/io/report.hpp"
#include "gflswing/io/sweep.hpp"
#include "gflswing/stability.hpp"

namespace fs = std::filesystem;
using namespace gflswing;

namespace {

constexpr int kExitStable = 0;
constexpr int kExitError = 1;
constexpr int kExitUnstable = 2;

struct Options {
  std::string config;
  std::string out = ".";
  std::string sweep;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::string log_level = "info";
};

unsigned thread_cap() {
  unsigned n = default_thread_count();
  if (const char* env = std::getenv("GFLSWING_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = static_cast<unsigned>(v);
    } catch (const std::exception&) {
      spdlog::warn("ignoring GFLSWING_THREADS='{}'", env);
    }
  }
  return n;
}

io::RunConfig load(const Options& o) {
  io::RunConfig cfg = io::load_config(o.config);
  if (o.dt) {
    if (!(*o.dt > 0.0)) throw ConfigError("--dt: must be > 0");
    cfg.scenario.dt = *o.dt;
    if (cfg.cct.resolution < *o.dt) cfg.cct.resolution = *o.dt;
  }
  cfg.cct.threads = thread_cap();
  spdlog::debug("config {} hash {}", o.config, io::config_hash(cfg));
  return cfg;
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

int run_simulate(const Options& o) {
  const io::RunConfig cfg = load(o);
  const Trajectory traj = simulate(cfg.fleet, cfg.grid, cfg.scenario, cfg.sim);
  const StabilityVerdict verdict = classify(traj, cfg.stability);
  const fs::path dir = out_dir(o);
  io::write_trajectory_csv(dir / "trajectory.csv", traj);
  io::write_json(dir / "summary.json", io::summary_json(cfg, verdict, std::nullopt, std::nullopt, &traj));
  spdlog::info("{}: {}{}", o.config, verdict.stable ? "stable" : "unstable",
               verdict.first_unstable ? " (first: " + *verdict.first_unstable + ")" : "");
  return verdict.stable ? kExitStable : kExitUnstable;
}

int run_cct(const Options& o) {
  const io::RunConfig cfg = load(o);
  const fs::path dir = out_dir(o);
  try {
    const CctResult r = find_cct(cfg.fleet, cfg.grid, cfg.scenario, cfg.cct, cfg.sim, cfg.stability);
    io::write_json(dir / "cct.json", io::summary_json(cfg, std::nullopt, r, std::nullopt));
    spdlog::info("cct {:.6g} s, bracket [{:.6g}, {:.6g}] s after {} evaluations", r.cct, r.bracket_lo,
                 r.bracket_hi, r.evaluations);
    return kExitStable;
  } catch (const BracketInvalid& e) {
    io::json j = {{"error", "BracketInvalid"},
                  {"message", e.what()},
                  {"t_min", io::evaluation_json(e.lo())},
                  {"t_max", io::evaluation_json(e.hi())},
                  {"provenance", io::provenance_json(cfg)}};
    io::write_json(dir / "cct.json", j);
    throw;
  } catch (const MonotonicityViolation& e) {
    io::json j = {{"error", "MonotonicityViolation"},
                  {"message", e.what()},
                  {"monotonicity_audit", io::audit_json(e.audit())},
                  {"provenance", io::provenance_json(cfg)}};
    io::write_json(dir / "cct.json", j);
    throw;
  }
}

int run_compare(const Options& o) {
  const io::RunConfig cfg = load(o);
  const fs::path dir = out_dir(o);
  const FleetComparison c = compare_uniform(cfg.fleet, cfg.grid, cfg.scenario, cfg.cct, cfg.sim, cfg.stability);
  io::write_json(dir / "comparison.json", io::summary_json(cfg, std::nullopt, std::nullopt, c));
  const double tau = c.cct_nonuniform;
  io::write_trajectory_csv(dir / "trajectory_nonuniform.csv",
                           simulate_clearing(cfg.fleet, cfg.grid, cfg.scenario, tau, cfg.sim, cfg.stability));
  io::write_trajectory_csv(dir / "trajectory_uniform.csv",
                           simulate_clearing(c.uniform_fleet, cfg.grid, cfg.scenario, tau, cfg.sim,
                                             cfg.stability));
  spdlog::info("cct non-uniform {:.6g} s, uniform {:.6g} s, delta {:.6g} s", c.cct_nonuniform,
               c.cct_uniform, c.delta);
  return kExitStable;
}

int run_sweep(const Options& o) {
  const io::RunConfig cfg = load(o);
  const io::SweepSpec spec = o.sweep.empty() ? io::SweepSpec{} : io::load_sweep(o.sweep);
  const fs::path dir = out_dir(o);
  const unsigned threads = thread_cap();
  spdlog::info("sweep: {} cells on {} threads", spec.cells(), threads);
  const auto rows = io::run_sweep(cfg, spec, threads);
  std::ofstream out(dir / "sweep.csv", std::ios::binary);
  if (!out) throw Error("cannot open " + (dir / "sweep.csv").string() + " for writing");
  io::write_sweep_csv(out, spec, rows);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      spdlog::warn("cell {}: {}", r.cell, r.error);
    }
  }
  spdlog::info("sweep: {} of {} cells failed", failed, rows.size());
  return kExitStable;
}

int run_validate(const Options& o) {
  const io::RunConfig cfg = load(o);
  if (!o.sweep.empty()) io::load_sweep(o.sweep);
  std::cout << io::to_json(cfg).dump(2) << "\n";
  return kExitStable;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transient angle stability of parallel grid-following inverters"};
  app.set_version_flag("--version", io::kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Reserved; the simulator is deterministic");
    sub->add_option("--dt", o.dt, "Override scenario.dt_s");
    sub->add_option("--log-level", o.log_level, "trace, debug, info, warn, error, off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate the scenario and classify it");
  auto* cct_cmd = app.add_subcommand("cct", "Critical clearing time by bisection");
  auto* compare_cmd = app.add_subcommand("compare", "CCT of the fleet against its uniform counterpart");
  auto* sweep_cmd = app.add_subcommand("sweep", "Cartesian parameter sweep");
  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate, print the resolved config");
  for (auto* sub : {simulate_cmd, cct_cmd, compare_cmd, sweep_cmd, validate_cmd}) add_common(sub);
  sweep_cmd->add_option("--sweep", o.sweep, "Sweep axes (JSON); omitted: a single CCT cell")
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--sweep", o.sweep, "Also validate a sweep file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitStable : kExitError;
  }

  auto logger = spdlog::stderr_color_st("gflswing");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(o.log_level));

  try {
    if (*simulate_cmd) return run_simulate(o);
    if (*cct_cmd) return run_cct(o);
    if (*compare_cmd) return run_compare(o);
    if (*sweep_cmd) return run_sweep(o);
    return run_validate(o);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
}
