#pragma once

#include <string>
#include <vector>

#include "gflswing/errors.hpp"
#include "gflswing/phasor.hpp"

namespace gflswing {

inline constexpr double kDefaultCurrentHeadroom = 1.2;
inline constexpr double kDefaultTripHoldoff = 0.5e-3;

/// Static ratings of one grid-following inverter.
struct InverterConfig {
  std::string name;
  double s_rated = 0.0;   // VA
  Impedance z_line;       // ohm
  double r_virtual = 0.0; // ohm, resistive virtual impedance in the voltage loop
  double kp = 0.0;        // PLL proportional gain, rad/s per V
  double ki = 0.0;        // PLL integral gain, rad/s^2 per V
  double i_max = 0.0;     // A, peak current limit
  double pf_angle = 0.0;  // rad
  double trip_holdoff = kDefaultTripHoldoff;  // s

  /// Z_gp + Z_vp.
  Impedance series_impedance() const { return z_line + Impedance(r_virtual, 0.0); }

  void validate() const {
    auto fail = [&](const char* what) {
      throw InvalidArgument("inverter '" + name + "': " + what);
    };
    if (!(s_rated > 0.0)) fail("s_rated must be > 0");
    if (!(i_max > 0.0)) fail("i_max must be > 0");
    if (!(kp >= 0.0)) fail("kp must be >= 0");
    if (!(ki >= 0.0)) fail("ki must be >= 0");
    if (!(trip_holdoff >= 0.0)) fail("trip_holdoff must be >= 0");
    if (!(z_line.r() >= 0.0)) fail("line resistance must be >= 0");
    if (!(r_virtual >= 0.0)) fail("r_virtual must be >= 0");
  }
};

using Fleet = std::vector<InverterConfig>;

/// Conventional headroom limit: 1.2 x rated current at nominal voltage.
inline double default_current_limit(double s_rated, double v_nominal) {
  if (!(v_nominal > 0.0)) throw InvalidArgument("v_nominal must be > 0");
  return kDefaultCurrentHeadroom * s_rated / v_nominal;
}

}  // namespace gflswing
