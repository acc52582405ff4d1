#pragma once

#include <stdexcept>
#include <string>

namespace gflswing {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Damped fixed-point iteration and the Newton fallback both failed to
/// reach the requested residual.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// The PCC voltage magnitude collapsed towards zero during iteration.
class ZeroVoltage : public Error {
 public:
  using Error::Error;
};

/// No pre-fault equilibrium exists for the configured fleet.
class InitializationFailure : public Error {
 public:
  using Error::Error;
};

/// A trajectory has no trip or divergence events.
class EmptyOrder : public Error {
 public:
  using Error::Error;
};

/// Configuration could not be parsed or failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gflswing
