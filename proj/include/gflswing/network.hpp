#pragma once

// Thevenin equivalent of the grid as seen by the aggregated inverter fleet.

#include <complex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gflswing/errors.hpp"
#include "gflswing/inverter.hpp"
#include "gflswing/phasor.hpp"

namespace gflswing {

struct TheveninEquivalent {
  Phasor v_th;
  Impedance z_th;
};

/// Explicit fault-on equivalent. Unset members fall back to the
/// depth-scaled pre-fault values.
struct FaultOverride {
  std::optional<Phasor> v_th;
  std::optional<Impedance> z_th;
};

struct GridModel {
  TheveninEquivalent prefault;
  Impedance z_load;  // Z_L between the feeder and the PCC
  FaultOverride fault_override;

  void validate() const {
    if (!(prefault.z_th.r() >= 0.0)) throw InvalidArgument("grid: z_th.r must be >= 0");
    if (fault_override.v_th && fault_override.v_th->magnitude() > prefault.v_th.magnitude()) {
      throw InvalidArgument("grid: fault-on |v_th| exceeds pre-fault |v_th|");
    }
    if (fault_override.z_th && !(fault_override.z_th->r() >= 0.0)) {
      throw InvalidArgument("grid: fault-on z_th.r must be >= 0");
    }
  }
};

/// Per-inverter Z_eq and its angle gamma.
struct EquivalentImpedanceSet {
  std::vector<Impedance> z_eq;
  std::vector<double> gamma;
};

/// Millman reduction of parallel voltage-source branches to one port.
inline TheveninEquivalent thevenin_reduce(std::span<const std::pair<Phasor, Impedance>> sources) {
  if (sources.empty()) throw InvalidArgument("thevenin_reduce: no branches");
  std::complex<double> admittance{};
  std::complex<double> current{};
  for (const auto& [v, z] : sources) {
    if (z.magnitude() == 0.0) throw InvalidArgument("thevenin_reduce: zero branch impedance");
    admittance += 1.0 / z.complex();
    current += v.complex() / z.complex();
  }
  if (sources.size() == 1) return {sources.front().first, sources.front().second};
  const std::complex<double> z_th = 1.0 / admittance;
  return {Phasor(z_th * current), Impedance(z_th)};
}

inline EquivalentImpedanceSet equivalent_impedance(std::span<const InverterConfig> fleet,
                                                   const TheveninEquivalent& grid,
                                                   Impedance z_load) {
  if (fleet.empty()) throw InvalidArgument("equivalent_impedance: empty fleet");
  EquivalentImpedanceSet out;
  out.z_eq.reserve(fleet.size());
  out.gamma.reserve(fleet.size());
  const Impedance feeder = grid.z_th + z_load;
  for (const auto& inv : fleet) {
    const Impedance z = parallel(inv.series_impedance(), feeder);
    out.z_eq.push_back(z);
    out.gamma.push_back(z.angle());
  }
  return out;
}

/// Fault-on equivalent: |v_th| scaled by (1 - depth) at the same angle and
/// held for the whole fault-on interval.
inline TheveninEquivalent faulted_grid(const GridModel& grid, double fault_depth) {
  if (!(fault_depth >= 0.0 && fault_depth <= 1.0)) {
    throw InvalidArgument("faulted_grid: fault_depth must lie in [0, 1]");
  }
  TheveninEquivalent out = grid.prefault;
  if (grid.fault_override.v_th) {
    out.v_th = *grid.fault_override.v_th;
  } else if (fault_depth > 0.0) {
    out.v_th = grid.prefault.v_th * (1.0 - fault_depth);
  }
  if (grid.fault_override.z_th) out.z_th = *grid.fault_override.z_th;
  return out;
}

}  // namespace gflswing
