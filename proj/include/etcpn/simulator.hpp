#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "etcpn/net.hpp"
#include "etcpn/signals.hpp"

namespace etcpn {

/// One sampled step of a (possibly faulty) run.
struct StepRecord {
  long k = 0;
  Index mode = 0;             // q(k), the mode driving x(k) -> x(k+1)
  Eigen::VectorXd u;          // u(k)
  Eigen::VectorXd x;          // x(k)
  Eigen::VectorXd y;          // y(k), including sensor fault and noise
  Eigen::VectorXi marking;    // discrete marking after the firing at k
  Eigen::VectorXi firing;     // sigma(k) over the discrete transitions
  bool fault_active = false;  // any injected fault active at k
  bool blocking_active = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;

  long size() const { return static_cast<long>(steps.size()); }
};

struct SimulationOptions {
  long horizon = 50;
  double noise_std = 0.01;  // std of both state and measurement noise
  std::uint64_t seed = 42;
};

/// x(k+1) = A_q x + B_q u + Fx_q f + w,  y(k) = C_q x + Fy_q f + v.
///
/// The discrete part follows the net: guards are evaluated on x(k) and the
/// enabled transition fires before the continuous update. While a
/// ModeBlocking fault is active the marking is held on its forced mode (the
/// token is moved there at onset if needed) and guard firings are suppressed.
/// Additive faults with an empty magnitude use default_fault_magnitude().
///
/// Throws NumericError if the state stops being finite.
Trajectory simulate(const HybridModel& model, const InputSignal& input,
                    std::span<const FaultSpec> faults, const SimulationOptions& options);

/// 0.5 times the standard deviation of y over a fault-free, noise-free run,
/// replicated on every fault channel.
Eigen::VectorXd default_fault_magnitude(const HybridModel& model, const InputSignal& input,
                                        long horizon);

/// Fault schedules of the three benchmark scenarios (mode indices are 0-based):
///   1: blocking [13,17] on mode 0 and [30,34] on mode 1
///   2: sensor faults on [5,10] and [25,30]
///   3: sensor on [5,10] and [37,41], blocking [20,24] on mode 0 and [37,41] on mode 1
/// Sensor magnitudes are left empty (simulator default). Throws ModelError for other ids.
std::vector<FaultSpec> case_schedule(int case_id);

/// Evaluation horizon of each benchmark scenario.
long case_horizon(int case_id);

}  // namespace etcpn
