#pragma once

// Complex phasor and impedance algebra. All quantities are SI (volts,
// amperes, ohms) and angles are radians.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "gflswing/errors.hpp"

namespace gflswing {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// Complex voltage or current phasor.
class Phasor {
 public:
  constexpr Phasor() = default;
  constexpr Phasor(double re, double im) : value_(re, im) {}
  constexpr explicit Phasor(std::complex<double> c) : value_(c) {}

  constexpr double re() const { return value_.real(); }
  constexpr double im() const { return value_.imag(); }
  double magnitude() const { return std::abs(value_); }
  double angle() const { return std::arg(value_); }
  constexpr std::complex<double> complex() const { return value_; }

  friend constexpr Phasor operator+(Phasor a, Phasor b) { return Phasor(a.value_ + b.value_); }
  friend constexpr Phasor operator-(Phasor a, Phasor b) { return Phasor(a.value_ - b.value_); }
  friend constexpr Phasor operator*(Phasor a, double k) { return Phasor(a.value_ * k); }
  friend constexpr Phasor operator*(double k, Phasor a) { return Phasor(a.value_ * k); }
  friend constexpr bool operator==(Phasor a, Phasor b) { return a.value_ == b.value_; }

 private:
  std::complex<double> value_{};
};

/// Series impedance r + jx.
class Impedance {
 public:
  constexpr Impedance() = default;
  constexpr Impedance(double r, double x) : r_(r), x_(x) {}
  constexpr explicit Impedance(std::complex<double> z) : r_(z.real()), x_(z.imag()) {}

  constexpr double r() const { return r_; }
  constexpr double x() const { return x_; }
  double magnitude() const { return std::hypot(r_, x_); }
  /// Angle in (-pi, pi].
  double angle() const { return std::atan2(x_, r_); }
  /// X/R; undefined for a purely reactive branch.
  double xr_ratio() const {
    if (r_ == 0.0) throw InvalidArgument("xr_ratio: resistance is zero");
    return x_ / r_;
  }
  constexpr std::complex<double> complex() const { return {r_, x_}; }

  friend constexpr Impedance operator+(Impedance a, Impedance b) {
    return {a.r_ + b.r_, a.x_ + b.x_};
  }
  friend constexpr Impedance operator*(Impedance a, double k) { return {a.r_ * k, a.x_ * k}; }
  friend constexpr bool operator==(Impedance a, Impedance b) = default;

  /// Ohm's law: voltage drop across this impedance for a current phasor.
  friend constexpr Phasor operator*(Impedance z, Phasor i) { return Phasor(z.complex() * i.complex()); }

 private:
  double r_ = 0.0;
  double x_ = 0.0;
};

/// Direct/quadrature projection of a phasor onto a rotating reference.
struct DqPair {
  double d = 0.0;
  double q = 0.0;
};

inline Phasor from_polar(double magnitude, double angle) {
  if (!(magnitude >= 0.0)) throw InvalidArgument("from_polar: magnitude must be non-negative");
  return Phasor(magnitude * std::cos(angle), magnitude * std::sin(angle));
}

/// Unit phasor e^{j angle}.
inline Phasor unit_phasor(double angle) { return Phasor(std::cos(angle), std::sin(angle)); }

/// Line impedance from resistance, inductance and system frequency.
inline Impedance line_impedance(double r_ohm, double l_henry, double f_hz) {
  if (!(f_hz > 0.0)) throw InvalidArgument("line_impedance: frequency must be positive");
  if (!(r_ohm >= 0.0)) throw InvalidArgument("line_impedance: resistance must be non-negative");
  if (!(l_henry >= 0.0)) throw InvalidArgument("line_impedance: inductance must be non-negative");
  return {r_ohm, 2.0 * kPi * f_hz * l_henry};
}

inline constexpr double kDegenerateParallel = 1e-12;

/// a || b. Commutative bit-for-bit: the sum and product are formed from
/// commutative complex operations only.
inline Impedance parallel(Impedance a, Impedance b) {
  const std::complex<double> sum = a.complex() + b.complex();
  if (std::abs(sum) < kDegenerateParallel) {
    throw InvalidArgument("parallel: |a + b| below 1e-12 ohm (antiresonant pair)");
  }
  return Impedance(a.complex() * b.complex() / sum);
}

inline DqPair dq_components(Phasor v, double ref_angle) {
  // Rotating by -ref_angle keeps d^2 + q^2 == |v|^2 to rounding.
  const std::complex<double> rotated = v.complex() * std::polar(1.0, -ref_angle);
  return {rotated.real(), rotated.imag()};
}

}  // namespace gflswing
