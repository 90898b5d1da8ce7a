#include "etcpn/pipeline.hpp"

namespace etcpn {

bool case_uses_event_residual(int case_id) { return case_id != 2; }

CaseResult run_case(const HybridModel& model, const ObserverGains& gains, const InputSignal& input,
                    const CaseConfig& config) {
  const long horizon = config.horizon > 0 ? config.horizon : case_horizon(config.case_id);
  std::vector<FaultSpec> faults = case_schedule(config.case_id);
  if (config.fault_magnitude)
    for (auto& f : faults)
      if (f.kind != FaultKind::ModeBlocking)
        f.magnitude = Eigen::VectorXd::Constant(model.mf, *config.fault_magnitude);

  const DiscreteObserverSpec obs = make_discrete_observer(model);
  ResidualOptions ropts;
  ropts.mode_source = config.mode_source;
  const bool with_event = case_uses_event_residual(config.case_id);

  CaseResult out;
  SimulationOptions sim;
  sim.horizon = horizon;
  sim.noise_std = config.noise_std;
  sim.seed = config.seed;
  out.trajectory = simulate(model, input, faults, sim);
  out.residuals = generate_residuals(out.trajectory, gains, obs, model, ropts);
  out.test_features = out.residuals.features(with_event);
  for (const auto& s : out.trajectory.steps) out.truth.push_back(s.fault_active);

  if (!config.run_detectors) return out;
  config.detectors.validate();

  SimulationOptions train = sim;
  train.horizon = config.train_horizon;
  train.seed = config.seed + 1;
  const Trajectory nominal = simulate(model, input, {}, train);
  out.train_features = generate_residuals(nominal, gains, obs, model, ropts).features(with_event);

  out.models.push_back(train_ocsvm(out.train_features, config.detectors.nu_ocsvm, config.detectors.gamma_ocsvm));
  out.models.push_back(train_svdd(out.train_features, config.detectors.nu_svdd,
                                  config.detectors.gamma_svdd.value_or(scale_gamma(out.train_features))));
  out.models.push_back(train_ee(out.train_features, config.detectors.contamination));
  for (const auto& m : out.models) {
    std::vector<bool> alarm;
    for (Eigen::Index k = 0; k < out.test_features.rows(); ++k)
      alarm.push_back(predict(m, out.test_features.row(k).transpose()));
    out.rows.push_back({to_string(m.kind), evaluate(out.truth, alarm)});
    out.alarms.push_back(std::move(alarm));
  }
  return out;
}

}  // namespace etcpn
