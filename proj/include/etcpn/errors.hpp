#pragma once

#include <stdexcept>
#include <string>

namespace etcpn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or vector shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A discrete/continuous cross block of the incidence matrix is nonzero.
class CouplingError : public Error {
 public:
  using Error::Error;
};

/// The discrete marking does not select exactly one mode.
class ModeAmbiguityError : public Error {
 public:
  using Error::Error;
};

/// A transition was fired while not enabled.
class EnablingError : public Error {
 public:
  using Error::Error;
};

/// A discrete marking would become negative.
class MarkingUnderflowError : public Error {
 public:
  using Error::Error;
};

/// Two discrete transitions competing for the same token are enabled together.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Invalid model content or configuration.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// State blew up (NaN or overflow) during simulation.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Gain recovery from LMI variables failed.
class RecoveryError : public Error {
 public:
  RecoveryError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// One-class QP did not reach the KKT tolerance.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, double kkt_violation)
      : Error(what), kkt_violation_(kkt_violation) {}
  double kkt_violation() const { return kkt_violation_; }

 private:
  double kkt_violation_;
};

}  // namespace etcpn
