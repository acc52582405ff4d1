#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "gflswing/io/config.hpp"
#include "gflswing/io/report.hpp"
#include "gflswing/io/sweep.hpp"

using namespace gflswing;
using namespace gflswing::io;

namespace {

const std::string kDir = GFLSWING_CONFIG_DIR;

const char* kMinimal = R"({
  "grid": {"v_th_V": 230, "z_th_ohm": {"r": 0.25, "x": 0.28}, "z_load_ohm": {"r": 0.05, "x": 0.02}},
  "fleet": [
    {"name": "A", "s_rated_VA": 6000, "line_r_ohm": 0.15, "line_l_uH": 40, "kp": 4.31e-3, "ki": 260},
    {"name": "B", "s_rated_VA": 12000, "line_r_ohm": 0.35, "line_l_uH": 60, "kp": 4.76e-3, "ki": 265}
  ],
  "scenario": {"t_fault_s": 0.001, "t_clear_s": 0.002, "fault_depth": 0.3, "t_end_s": 0.005}
})";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST(LoadConfig, BundledReferenceFleet) {
  const RunConfig cfg = load_config(kDir + "/table1.json");
  ASSERT_EQ(cfg.fleet.size(), 5u);
  const double kva[] = {6, 9, 8, 12, 10};
  for (std::size_t p = 0; p < 5; ++p) {
    EXPECT_EQ(cfg.fleet[p].s_rated, kva[p] * 1000.0);
    EXPECT_EQ(cfg.fleet[p].name, "Inv " + std::to_string(p + 1));
    EXPECT_NEAR(cfg.fleet[p].z_line.xr_ratio() / kReferenceRows[p].xr_listed, 1.0, 5e-3);
    EXPECT_EQ(cfg.fleet[p].kp, kReferenceRows[p].kp);
    EXPECT_EQ(cfg.fleet[p].ki, kReferenceRows[p].ki);
    EXPECT_EQ(cfg.fleet[p].r_virtual, kReferenceRows[p].r_virtual);
  }
  EXPECT_EQ(cfg.scenario.dt, 1e-5);
  EXPECT_NO_THROW(load_config(kDir + "/table1_nofault.json"));
  EXPECT_NO_THROW(load_config(kDir + "/table1_uncleared.json"));
}

TEST(LoadConfig, DefaultsAppliedAndEchoed) {
  const RunConfig cfg = parse_config(kMinimal);
  EXPECT_NEAR(cfg.fleet[0].i_max, 1.2 * 6000.0 / 230.0, 1e-12);
  EXPECT_NEAR(cfg.fleet[1].i_max, 1.2 * 12000.0 / 230.0, 1e-12);
  EXPECT_EQ(cfg.fleet[0].trip_holdoff, 0.5e-3);
  EXPECT_EQ(cfg.stability.settle_window, 1e-3);
  const json j = to_json(cfg);
  EXPECT_TRUE(j["fleet"][0]["i_max_defaulted"].get<bool>());
  EXPECT_NEAR(j["fleet"][0]["i_max_A"].get<double>(), 31.3043478, 1e-6);
  EXPECT_EQ(j["solver"]["max_iter"], 100);
}

TEST(LoadConfig, ZeroStepNamesTheField) {
  const std::string err = error_of(replace(kMinimal, R"("t_end_s": 0.005)", R"("t_end_s": 0.005, "dt_s": 0)"));
  EXPECT_NE(err.find("scenario.dt_s"), std::string::npos) << err;
}

TEST(LoadConfig, ValidationErrorsNameFieldAndConstraint) {
  EXPECT_NE(error_of(replace(kMinimal, R"("fault_depth": 0.3)", R"("fault_depth": 1.3)"))
                .find("scenario.fault_depth: must lie in [0, 1]"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("s_rated_VA": 12000)", R"("s_rated_VA": -1)"))
                .find("fleet[1].s_rated_VA"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("name": "B")", R"("name": "A")")).find("fleet[1].name"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("t_clear_s": 0.002)", R"("t_clear_s": 0.0005)"))
                .find("scenario.t_clear_s"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("kp": 4.31e-3)", R"("kp": 4.31e-3, "kq": 1)")).find("fleet[0].kq: unknown field"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("v_th_V": 230,)", "")).find("grid.v_th_V"), std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("kp": 4.31e-3)", R"("kp": "fast")")).find("fleet[0].kp: expected a number"),
            std::string::npos);
}

TEST(LoadConfig, ParseErrorCarriesLineAndColumn) {
  const std::string err = error_of("{\n  \"grid\": {\n    \"v_th_V\": 230,,\n  }\n}");
  EXPECT_NE(err.find("cfg.json"), std::string::npos) << err;
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
  EXPECT_NE(err.find("column"), std::string::npos) << err;
}

TEST(LoadConfig, MissingFile) {
  EXPECT_THROW(load_config(kDir + "/does_not_exist.json"), ConfigError);
}

TEST(ConfigHash, ChangesWithSemanticFieldsOnly) {
  const RunConfig a = parse_config(kMinimal);
  const std::string h = config_hash(a);
  EXPECT_EQ(h.size(), 16u);
  // Formatting, comments, key order and explicitly written defaults do not count.
  std::string reformatted = "// comment\n" + replace(kMinimal, R"({"name": "A", "s_rated_VA": 6000,)",
                                                     R"({"s_rated_VA": 6000.0, "name": "A", "trip_holdoff_s": 0.0005,)");
  EXPECT_EQ(config_hash(parse_config(reformatted)), h);
  EXPECT_EQ(config_hash(parse_config(replace(kMinimal, R"("t_end_s": 0.005)", R"("t_end_s": 0.005, "dt_s": 1e-5)"))), h);
  // Every semantic change does.
  for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
           {R"("fault_depth": 0.3)", R"("fault_depth": 0.31)"},
           {R"("v_th_V": 230)", R"("v_th_V": 231)"},
           {R"("ki": 260)", R"("ki": 261)"},
           {R"("name": "A")", R"("name": "C")"},
           {R"("t_clear_s": 0.002)", R"("t_clear_s": null)"},
           {R"("line_l_uH": 40)", R"("line_l_uH": 41)"},
           {R"("t_end_s": 0.005)", R"("t_end_s": 0.005, "dt_s": 2e-5)"},
       }) {
    EXPECT_NE(config_hash(parse_config(replace(kMinimal, from, to))), h) << to;
  }
}

TEST(Report, CsvLayoutAndFormatting) {
  const RunConfig cfg = parse_config(kMinimal);
  const Trajectory traj = simulate(cfg.fleet, cfg.grid, cfg.scenario, cfg.sim);
  std::ostringstream out;
  write_trajectory_csv(out, traj);
  const std::string csv = out.str();
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  std::istringstream lines(csv);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header.rfind("t_s,vpcc_mag_V,vpcc_angle_rad,vpcc_angle_deg,A_theta_cg_rad,A_theta_cg_deg,A_i_mag_A,A_i_q_A,A_v_gq_V,A_limited,A_tripped,B_theta_cg_rad", 0),
            0u);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 4 + 7 * 2 - 1);
  EXPECT_EQ(first.rfind("0.00000000e+00,", 0), 0u);
  std::size_t rows = 1;
  for (std::string line; std::getline(lines, line);) ++rows;
  EXPECT_EQ(rows, traj.records.size());
  EXPECT_EQ(fmt9(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(fmt_time(1.5e-3), "1.50000000e-03");
}

TEST(Report, SummaryIsDeterministicAndSorted) {
  const RunConfig cfg = parse_config(kMinimal);
  auto render = [&] {
    const Trajectory traj = simulate(cfg.fleet, cfg.grid, cfg.scenario, cfg.sim);
    return summary_json(cfg, classify(traj, cfg.stability), std::nullopt, std::nullopt, &traj).dump(2);
  };
  const std::string a = render();
  EXPECT_EQ(a, render());
  const json j = json::parse(a);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(j["provenance"]["config_hash"], config_hash(cfg));
  EXPECT_EQ(j["provenance"]["tool_version"], kToolVersion);
  EXPECT_EQ(round9(0.1234567891234), 0.123456789);
}

TEST(Sweep, ParsesAxesAndRanges) {
  const SweepSpec spec = parse_sweep(R"({"axes": [
      {"parameter": "fault_depth", "values": [0.2, 0.3]},
      {"parameter": "clearing_interval_s", "start": 0.001, "stop": 0.003, "count": 3},
      {"parameter": "s_rated_scale", "inverter": "A", "values": [1.0, 1.5]}]})");
  ASSERT_EQ(spec.axes.size(), 3u);
  EXPECT_EQ(spec.cells(), 12u);
  EXPECT_NEAR(spec.axes[1].values[1], 0.002, 1e-15);
  EXPECT_EQ(cell_values(spec, 0), (std::vector<double>{0.2, 0.001, 1.0}));
  EXPECT_EQ(cell_values(spec, 11), (std::vector<double>{0.3, 0.003, 1.5}));
  EXPECT_THROW(parse_sweep(R"({"axes": [{"parameter": "speed", "values": [1]}]})"), ConfigError);
  EXPECT_THROW(parse_sweep(R"({"axes": [{"parameter": "fault_depth", "inverter": "A", "values": [1]}]})"), ConfigError);
  EXPECT_EQ(parse_sweep("{}").cells(), 1u);
}

TEST(Sweep, EmptySpecIsOneCctCell) {
  RunConfig cfg = load_config(kDir + "/table1.json");
  cfg.cct.audit_points = 0;
  const auto rows = run_sweep(cfg, {}, 1);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_TRUE(rows[0].cct) << rows[0].error;
  const CctResult direct = find_cct(cfg.fleet, cfg.grid, cfg.scenario, cfg.cct, cfg.sim, cfg.stability);
  EXPECT_EQ(rows[0].cct->cct, direct.cct);
  EXPECT_EQ(rows[0].cct->evaluations, direct.evaluations);
}

TEST(Sweep, ClearingAxisMatchesIndividualRuns) {
  const RunConfig cfg = load_config(kDir + "/table1.json");
  const SweepSpec spec = parse_sweep(
      R"({"axes": [{"parameter": "clearing_interval_s", "start": 0.0005, "stop": 0.0045, "count": 5}]})");
  const auto rows = run_sweep(cfg, spec, 2);
  ASSERT_EQ(rows.size(), 5u);
  int transitions = 0;
  for (std::size_t c = 0; c < rows.size(); ++c) {
    ASSERT_TRUE(rows[c].verdict) << rows[c].error;
    FaultScenario sc = cfg.scenario;
    sc.t_clear = cfg.scenario.t_fault + rows[c].values[0];
    sc.t_end = *sc.t_clear + cfg.stability.settle_window + 1e-4;
    const StabilityVerdict single = classify(simulate(cfg.fleet, cfg.grid, sc, cfg.sim), cfg.stability);
    EXPECT_EQ(rows[c].verdict->stable, single.stable) << c;
    if (c > 0 && rows[c - 1].verdict->stable != rows[c].verdict->stable) ++transitions;
  }
  EXPECT_TRUE(rows.front().verdict->stable);
  EXPECT_FALSE(rows.back().verdict->stable);
  EXPECT_EQ(transitions, 1);
}

TEST(Sweep, FailingCellsAreRecordedAndTheRestRun) {
  RunConfig cfg = load_config(kDir + "/table1.json");
  cfg.cct.audit_points = 0;
  const SweepSpec spec = parse_sweep(R"({"axes": [{"parameter": "fault_depth", "values": [0.0, 0.3]}]})");
  const auto rows = run_sweep(cfg, spec, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NE(rows[0].error.find("BracketInvalid"), std::string::npos) << rows[0].error;
  EXPECT_TRUE(rows[1].cct);
  std::ostringstream out;
  write_sweep_csv(out, spec, rows);
  const std::string csv = out.str();
  EXPECT_EQ(csv.rfind("cell,fault_depth,mode,status,verdict", 0), 0u);
  EXPECT_NE(csv.find("0,0,cct,error,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("1,0.3,cct,ok,"), std::string::npos) << csv;
}

TEST(Sweep, ScaleAxesTouchOnlyTheNamedInverter) {
  RunConfig cfg = parse_config(kMinimal);
  SweepSpec spec = parse_sweep(R"({"axes": [
      {"parameter": "s_rated_scale", "inverter": "B", "values": [2.0]},
      {"parameter": "xr_scale", "values": [3.0]},
      {"parameter": "clearing_interval_s", "values": [0.001]}]})");
  RunConfig scaled = cfg;
  io::detail::apply_scale(scaled, spec.axes[0], 2.0);
  io::detail::apply_scale(scaled, spec.axes[1], 3.0);
  EXPECT_EQ(scaled.fleet[0].s_rated, 6000.0);
  EXPECT_EQ(scaled.fleet[1].s_rated, 24000.0);
  EXPECT_NEAR(scaled.fleet[1].i_max, 1.2 * 24000.0 / 230.0, 1e-12);
  EXPECT_NEAR(scaled.fleet[0].z_line.x(), 3.0 * cfg.fleet[0].z_line.x(), 1e-15);
  EXPECT_EQ(scaled.fleet[0].z_line.r(), cfg.fleet[0].z_line.r());
  spec.axes[0].inverter = "Z";
  const auto rows = run_sweep(cfg, spec, 1);
  EXPECT_NE(rows[0].error.find("unknown inverter"), std::string::npos);
}
