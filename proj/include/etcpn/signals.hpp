#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace etcpn {

enum class InputKind { Constant, Step, Sine, Prbs };

/// Exogenous input generator. Every input channel receives the same value.
///   constant: amplitude
///   step:     amplitude for at <= k (< at + width when width > 0), else 0
///   sine:     amplitude * sin(2 pi k / period)
///   prbs:     +-amplitude, re-drawn every `hold` steps from `seed`
struct InputSignal {
  InputKind kind = InputKind::Step;
  double amplitude = 1.0;
  long at = 0;
  long width = 1;
  double period = 20.0;
  std::uint64_t seed = 0;
  long hold = 1;

  /// Values u(0) ... u(horizon - 1).
  std::vector<double> sample(long horizon) const;

  bool operator==(const InputSignal&) const = default;
};

/// Inclusive step interval [first, last].
struct StepInterval {
  long first = 0;
  long last = 0;

  bool contains(long k) const { return first <= k && k <= last; }
  bool operator==(const StepInterval&) const = default;
};

enum class FaultKind { SensorAdditive, StateAdditive, ModeBlocking };

/// Additive fault through F^y_q (sensor) or F^x_q (state), or a mode-blocking
/// fault that holds the discrete marking on `forced_mode`.
struct FaultSpec {
  FaultKind kind = FaultKind::SensorAdditive;
  std::vector<StepInterval> intervals;
  // Constant fault vector (length m_f) while active. Empty selects the
  // simulator's default magnitude.
  Eigen::VectorXd magnitude;
  // Optional per-step profile, m_f x horizon; overrides `magnitude`.
  Eigen::MatrixXd profile;
  // Mode index (0-based) for ModeBlocking.
  Eigen::Index forced_mode = -1;

  bool active(long k) const;
};

}  // namespace etcpn
