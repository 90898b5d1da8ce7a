#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "etcpn/detectors.hpp"
#include "etcpn/metrics.hpp"
#include "etcpn/observer.hpp"
#include "etcpn/simulator.hpp"

namespace etcpn {

struct CaseConfig {
  int case_id = 1;
  long horizon = 0;  // 0: the scenario's own horizon
  long train_horizon = 500;
  std::uint64_t seed = 42;
  double noise_std = 0.01;
  std::optional<double> fault_magnitude;  // empty: simulator default
  DetectorConfig detectors;
  bool run_detectors = true;
  ModeSource mode_source = ModeSource::DiscreteObserver;
};

struct CaseResult {
  Trajectory trajectory;
  ResidualTrace residuals;
  std::vector<bool> truth;
  Eigen::MatrixXd train_features;
  Eigen::MatrixXd test_features;
  std::vector<OneClassModel> models;         // OC-SVM, SVDD, EE
  std::vector<std::vector<bool>> alarms;     // per model, per step
  std::vector<MetricRow> rows;
};

/// Whether the scenario's detector features include the event residual.
bool case_uses_event_residual(int case_id);

/// Simulates a fault-free training run (seed + 1) and the faulty run (seed),
/// generates residuals for both, trains the three detectors on the former and
/// scores the latter.
CaseResult run_case(const HybridModel& model, const ObserverGains& gains, const InputSignal& input,
                    const CaseConfig& config);

}  // namespace etcpn
