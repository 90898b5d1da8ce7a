#include "etcpn/simulator.hpp"

#include <cmath>
#include <random>
#include <string>

namespace etcpn {

namespace {

constexpr double kDivergenceBound = 1e100;

Eigen::VectorXd fault_vector(const FaultSpec& f, long k, const Eigen::VectorXd& fallback) {
  if (f.profile.size() != 0) {
    if (k < f.profile.cols()) return f.profile.col(k);
    return Eigen::VectorXd::Zero(f.profile.rows());
  }
  return f.magnitude.size() != 0 ? f.magnitude : fallback;
}

}  // namespace

Eigen::VectorXd default_fault_magnitude(const HybridModel& model, const InputSignal& input,
                                        long horizon) {
  SimulationOptions opts;
  opts.horizon = horizon;
  opts.noise_std = 0.0;
  const Trajectory nominal = simulate(model, input, {}, opts);
  double mean = 0.0, sq = 0.0;
  long count = 0;
  for (const auto& s : nominal.steps) {
    for (Index i = 0; i < s.y.size(); ++i) {
      mean += s.y(i);
      sq += s.y(i) * s.y(i);
      ++count;
    }
  }
  double std_dev = 0.0;
  if (count > 0) {
    mean /= static_cast<double>(count);
    std_dev = std::sqrt(std::max(0.0, sq / static_cast<double>(count) - mean * mean));
  }
  return Eigen::VectorXd::Constant(model.mf, 0.5 * std_dev);
}

Trajectory simulate(const HybridModel& model, const InputSignal& input,
                    std::span<const FaultSpec> faults, const SimulationOptions& options) {
  const Index n = model.n, r = model.r, mf = model.mf;
  for (const auto& f : faults) {
    if (f.kind == FaultKind::ModeBlocking) {
      if (f.forced_mode < 0 || f.forced_mode >= model.num_modes())
        throw ModelError("blocking fault needs a valid forced mode");
    } else {
      if (f.magnitude.size() != 0 && f.magnitude.size() != mf)
        throw DimensionError("fault magnitude must have mf entries");
      if (f.profile.size() != 0 && f.profile.rows() != mf)
        throw DimensionError("fault profile must have mf rows");
      if (!f.magnitude.allFinite() || !f.profile.allFinite())
        throw ModelError("fault magnitudes must be finite");
    }
  }

  Eigen::VectorXd fallback;
  for (const auto& f : faults) {
    if (f.kind == FaultKind::ModeBlocking || f.magnitude.size() != 0 || f.profile.size() != 0) continue;
    bool within = false;
    for (const auto& iv : f.intervals) within = within || iv.first < options.horizon;
    if (within) {
      fallback = default_fault_magnitude(model, input, options.horizon);
      break;
    }
  }

  const std::vector<double> u_seq = input.sample(options.horizon);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool noisy = options.noise_std > 0.0;

  Trajectory traj;
  traj.steps.reserve(static_cast<size_t>(std::max(options.horizon, 0L)));
  Marking marking = model.net.initial;

  for (long k = 0; k < options.horizon; ++k) {
    const Eigen::VectorXd x = model.state(marking);
    const Index previous = active_mode(marking.discrete);

    const FaultSpec* blocking = nullptr;
    Eigen::VectorXd f_sensor = Eigen::VectorXd::Zero(mf);
    Eigen::VectorXd f_state = Eigen::VectorXd::Zero(mf);
    bool any_fault = false;
    for (const auto& f : faults) {
      if (!f.active(k)) continue;
      any_fault = true;
      switch (f.kind) {
        case FaultKind::ModeBlocking:
          if (!blocking) blocking = &f;
          break;
        case FaultKind::SensorAdditive: f_sensor += fault_vector(f, k, fallback); break;
        case FaultKind::StateAdditive: f_state += fault_vector(f, k, fallback); break;
      }
    }

    Eigen::VectorXi sigma = Eigen::VectorXi::Zero(static_cast<Index>(model.guards.size()));
    if (!blocking) {
      sigma = guard_firings(model, marking.discrete, x);
    } else if (blocking->forced_mode != previous) {
      for (size_t g = 0; g < model.guards.size(); ++g) {
        if (model.guards[g].from_mode == previous && model.guards[g].to_mode == blocking->forced_mode) {
          sigma(static_cast<Index>(g)) = 1;
          break;
        }
      }
    }
    Eigen::VectorXi next_discrete = step_discrete(model.net, marking.discrete, sigma);
    if (blocking && active_mode(next_discrete) != blocking->forced_mode) {
      // No transition connects the two modes: the fault relocates the token directly.
      next_discrete.setZero();
      next_discrete(blocking->forced_mode) = 1;
    }
    const Index q = active_mode(next_discrete);
    const ModeLti& mode = model.modes[q];

    StepRecord rec;
    rec.k = k;
    rec.mode = q;
    rec.u = Eigen::VectorXd::Constant(model.p, u_seq[static_cast<size_t>(k)]);
    rec.x = x;
    rec.y = mode.C * x;
    if (mf > 0) rec.y += mode.Fy * f_sensor;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    if (noisy) {
      for (Index i = 0; i < n; ++i) w(i) = options.noise_std * gauss(rng);
      for (Index i = 0; i < r; ++i) rec.y(i) += options.noise_std * gauss(rng);
    }
    rec.marking = next_discrete;
    rec.firing = sigma;
    rec.fault_active = any_fault;
    rec.blocking_active = blocking != nullptr;

    Marking next;
    next.discrete = next_discrete;
    next.continuous = step_continuous(marking.continuous, model.blocks.wC, next_discrete, rec.u);
    if (mf > 0) next.continuous.segment(model.p, n) += mode.Fx * f_state;
    if (noisy) next.continuous.segment(model.p, n) += w;
    next.step = marking.step + 1;

    const Eigen::VectorXd xn = next.continuous.segment(model.p, n);
    if (!xn.allFinite() || (n > 0 && xn.cwiseAbs().maxCoeff() > kDivergenceBound))
      throw NumericError("numeric divergence at step " + std::to_string(k + 1), k + 1);

    traj.steps.push_back(std::move(rec));
    marking = std::move(next);
  }
  return traj;
}

std::vector<FaultSpec> case_schedule(int case_id) {
  auto block = [](long a, long b, Index mode) {
    FaultSpec f;
    f.kind = FaultKind::ModeBlocking;
    f.intervals = {{a, b}};
    f.forced_mode = mode;
    return f;
  };
  auto sensor = [](long a, long b) {
    FaultSpec f;
    f.kind = FaultKind::SensorAdditive;
    f.intervals = {{a, b}};
    return f;
  };
  switch (case_id) {
    case 1: return {block(13, 17, 0), block(30, 34, 1)};
    case 2: return {sensor(5, 10), sensor(25, 30)};
    case 3: {
      FaultSpec s = sensor(5, 10);
      s.intervals.push_back({37, 41});
      return {s, block(20, 24, 0), block(37, 41, 1)};
    }
    default: throw ModelError("unknown case id " + std::to_string(case_id));
  }
}

long case_horizon(int case_id) {
  switch (case_id) {
    case 1:
    case 2: return 45;
    case 3: return 50;
    default: throw ModelError("unknown case id " + std::to_string(case_id));
  }
}

}  // namespace etcpn
