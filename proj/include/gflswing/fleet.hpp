#pragma once

// Five-inverter reference fleet and fleet transformations.

#include <string>
#include <vector>

#include "gflswing/inverter.hpp"
#include "gflswing/phasor.hpp"

namespace gflswing {

inline constexpr double kSystemFrequency = 60.0;
inline constexpr double kDefaultNominalVoltage = 230.0;

struct ReferenceRow {
  const char* name;
  double s_rated;      // VA
  double line_r;       // ohm
  double line_l;       // H
  double xr_listed;    // X/R as tabulated
  double r_virtual;    // ohm
  double kp;
  double ki;
};

inline constexpr ReferenceRow kReferenceRows[] = {
    {"Inv 1", 6000.0, 0.15, 40e-6, 0.1005, 0.16, 4.31e-3, 260.0},
    {"Inv 2", 9000.0, 0.30, 45e-6, 0.0565, 0.12, 4.45e-3, 259.0},
    {"Inv 3", 8000.0, 0.25, 50e-6, 0.0754, 0.06, 4.67e-3, 255.0},
    {"Inv 4", 12000.0, 0.35, 60e-6, 0.0646, 0.00, 4.76e-3, 265.0},
    {"Inv 5", 10000.0, 0.30, 65e-6, 0.0817, 0.04, 4.57e-3, 255.0},
};

/// Reference fleet. A non-positive `i_max` applies the 1.2 pu default per
/// inverter.
inline Fleet reference_fleet(double i_max = 0.0, double v_nominal = kDefaultNominalVoltage,
                             double frequency = kSystemFrequency) {
  Fleet fleet;
  for (const ReferenceRow& row : kReferenceRows) {
    InverterConfig inv;
    inv.name = row.name;
    inv.s_rated = row.s_rated;
    inv.z_line = line_impedance(row.line_r, row.line_l, frequency);
    inv.r_virtual = row.r_virtual;
    inv.kp = row.kp;
    inv.ki = row.ki;
    inv.i_max = i_max > 0.0 ? i_max : default_current_limit(row.s_rated, v_nominal);
    fleet.push_back(inv);
  }
  return fleet;
}

/// Same resistances, line reactance rescaled so every line has X/R = ratio.
inline Fleet with_uniform_xr(Fleet fleet, double ratio) {
  for (InverterConfig& inv : fleet) inv.z_line = Impedance(inv.z_line.r(), ratio * inv.z_line.r());
  return fleet;
}

/// Mean-preserving uniform counterpart: every unit gets the arithmetic mean
/// of each rating, so count and total s_rated are unchanged. Labels are kept.
inline Fleet make_uniform_fleet(const Fleet& fleet) {
  if (fleet.empty()) throw InvalidArgument("make_uniform_fleet: empty fleet");
  const double n = static_cast<double>(fleet.size());
  InverterConfig mean;
  double r = 0.0, x = 0.0;
  for (const InverterConfig& inv : fleet) {
    mean.s_rated += inv.s_rated / n;
    r += inv.z_line.r() / n;
    x += inv.z_line.x() / n;
    mean.r_virtual += inv.r_virtual / n;
    mean.kp += inv.kp / n;
    mean.ki += inv.ki / n;
    mean.i_max += inv.i_max / n;
    mean.pf_angle += inv.pf_angle / n;
  }
  mean.trip_holdoff = 0.0;
  for (const InverterConfig& inv : fleet) mean.trip_holdoff += inv.trip_holdoff / n;
  mean.z_line = Impedance(r, x);
  Fleet out;
  for (const InverterConfig& inv : fleet) {
    InverterConfig u = mean;
    u.name = inv.name;
    out.push_back(u);
  }
  return out;
}

}  // namespace gflswing
