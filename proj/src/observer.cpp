#include "etcpn/observer.hpp"

#include <algorithm>
#include <cmath>

namespace etcpn {

Eigen::VectorXd continuous_observer_step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& y, const ModeLti& mode,
                                         const Eigen::MatrixXd& L) {
  if (xhat.size() != mode.A.rows() || u.size() != mode.B.cols() || y.size() != mode.C.rows() ||
      L.rows() != mode.A.rows() || L.cols() != mode.C.rows())
    throw DimensionError("continuous_observer_step: inconsistent shapes");
  return mode.A * xhat + mode.B * u + L * (y - mode.C * xhat);
}

Eigen::MatrixXd observer_incidence(const ModeLti& mode, const Eigen::MatrixXd& L) {
  const Index n = mode.A.rows(), p = mode.B.cols(), r = mode.C.rows();
  if (L.rows() != n || L.cols() != r) throw DimensionError("observer_incidence: L must be n x r");
  const Index pb = p + r;
  const Index f = pb + n;
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(f, f);
  post.topLeftCorner(pb, pb).setIdentity();
  post.block(pb, 0, n, p) = mode.B;
  post.block(pb, p, n, r) = L;
  post.bottomRightCorner(n, n) = mode.A - L * mode.C;
  return post - Eigen::MatrixXd::Identity(f, f);
}

bool DiscreteObserverSpec::fully_measured() const {
  return static_cast<Index>(measured_places.size()) == num_places() &&
         static_cast<Index>(measured_transitions.size()) == num_transitions();
}

Eigen::VectorXd DiscreteObserverSpec::measure(const Eigen::VectorXi& marking,
                                              const Eigen::VectorXi& firing) const {
  if (marking.size() != num_places() || firing.size() != num_transitions())
    throw DimensionError("discrete observer: marking/firing size mismatch");
  Eigen::VectorXd y(num_places() + num_transitions());
  y << marking.cast<double>(), firing.cast<double>();
  return H * y;
}

DiscreteObserverSpec make_discrete_observer(const Eigen::MatrixXi& wD,
                                            std::vector<Index> measured_places,
                                            std::vector<Index> measured_transitions,
                                            std::optional<std::vector<Index>> mode_places) {
  const Index P = wD.rows(), T = wD.cols();
  auto check = [](std::vector<Index>& idx, Index bound, const char* what) {
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
      throw ModelError(std::string("duplicate measured ") + what);
    for (Index i : idx)
      if (i < 0 || i >= bound) throw DimensionError(std::string("measured ") + what + " out of range");
  };
  check(measured_places, P, "place");
  check(measured_transitions, T, "transition");

  DiscreteObserverSpec obs;
  obs.wD = wD;
  obs.measured_places = std::move(measured_places);
  obs.measured_transitions = std::move(measured_transitions);
  if (mode_places) {
    obs.mode_places = *mode_places;
    check(obs.mode_places, P, "mode place");
  } else {
    for (Index i = 0; i < P; ++i) obs.mode_places.push_back(i);
  }

  obs.E = Eigen::MatrixXd::Zero(P, P + T);
  obs.E.leftCols(P).setIdentity();
  obs.E.rightCols(T) = wD.cast<double>();
  obs.A = Eigen::MatrixXd::Zero(P, P + T);
  obs.A.leftCols(P).setIdentity();

  const Index po = static_cast<Index>(obs.measured_places.size());
  const Index mo = static_cast<Index>(obs.measured_transitions.size());
  obs.H = Eigen::MatrixXd::Zero(po + mo, P + T);
  for (Index i = 0; i < po; ++i) obs.H(i, obs.measured_places[i]) = 1.0;
  for (Index j = 0; j < mo; ++j) obs.H(po + j, P + obs.measured_transitions[j]) = 1.0;

  if (obs.fully_measured()) {
    obs.F = Eigen::MatrixXd::Zero(P, P);
    obs.G = Eigen::MatrixXd::Zero(P, P + T);
    obs.G.leftCols(P).setIdentity();
    obs.R = Eigen::MatrixXd::Zero(P + T, P);
    obs.N = Eigen::MatrixXd::Identity(P + T, P + T);
  }
  return obs;
}

DiscreteObserverSpec make_discrete_observer(const HybridModel& model) {
  std::vector<Index> places(static_cast<size_t>(model.blocks.wD.rows()));
  std::vector<Index> transitions(static_cast<size_t>(model.blocks.wD.cols()));
  for (size_t i = 0; i < places.size(); ++i) places[i] = static_cast<Index>(i);
  for (size_t j = 0; j < transitions.size(); ++j) transitions[j] = static_cast<Index>(j);
  return make_discrete_observer(model.blocks.wD, places, transitions);
}

DiscreteEstimate initial_estimate(const DiscreteObserverSpec& obs, const Eigen::VectorXi& m0) {
  if (m0.size() != obs.num_places()) throw DimensionError("initial marking size mismatch");
  DiscreteEstimate est;
  est.marking = m0;
  est.firing = Eigen::VectorXi::Zero(obs.num_transitions());
  return est;
}

namespace {

Eigen::VectorXi round_marking(const DiscreteObserverSpec& obs, const Eigen::VectorXd& m) {
  Eigen::VectorXi out(m.size());
  for (Index i = 0; i < m.size(); ++i)
    out(i) = static_cast<int>(std::max(0.0, std::round(m(i))));
  if (!obs.mode_places.empty()) {
    Index best = obs.mode_places.front();
    for (Index i : obs.mode_places)
      if (m(i) > m(best)) best = i;
    for (Index i : obs.mode_places) out(i) = 0;
    out(best) = 1;
  }
  return out;
}

}  // namespace

DiscreteEstimate discrete_observer_step(const DiscreteObserverSpec& obs,
                                        const DiscreteEstimate& previous,
                                        const Eigen::VectorXd& psi) {
  const Index P = obs.num_places(), T = obs.num_transitions();
  const Index po = static_cast<Index>(obs.measured_places.size());
  const Index mo = static_cast<Index>(obs.measured_transitions.size());
  if (psi.size() != po + mo) throw DimensionError("psi has the wrong length");
  const Eigen::MatrixXd W = obs.wD.cast<double>();
  const Eigen::VectorXd m_prev = previous.marking.cast<double>();
  const Eigen::VectorXd s_prev = previous.firing.cast<double>();
  const bool first = previous.previous_psi.size() == 0;

  DiscreteEstimate est;
  est.previous_psi = psi;

  if (obs.fully_measured()) {
    const Eigen::VectorXd y = obs.N * psi;
    est.marking = round_marking(obs, y.head(P));
    est.firing = y.tail(T).array().round().cast<int>().cwiseMax(0);
    const Eigen::VectorXd predicted = first ? m_prev : Eigen::VectorXd(m_prev + W * s_prev);
    est.mismatch = (y.head(P) - predicted).norm();
    est.consistent = est.mismatch <= 0.5;
    return est;
  }

  // Unknowns w = [sigma(k-1); M(k); sigma(k)].
  const Index nw = 2 * T + P;
  const Index rows = P + (first ? T : mo) + po + mo;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, nw);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  Index row = 0;
  // M(k) - W sigma(k-1) = M(k-1)
  J.block(row, 0, P, T) = -W;
  J.block(row, T, P, P).setIdentity();
  b.segment(row, P) = m_prev;
  row += P;
  if (first) {
    J.block(row, 0, T, T).setIdentity();
    row += T;
  } else {
    for (Index j = 0; j < mo; ++j, ++row) {
      J(row, obs.measured_transitions[j]) = 1.0;
      b(row) = previous.previous_psi(po + j);
    }
  }
  for (Index i = 0; i < po; ++i, ++row) {
    J(row, T + obs.measured_places[i]) = 1.0;
    b(row) = psi(i);
  }
  for (Index j = 0; j < mo; ++j, ++row) {
    J(row, T + P + obs.measured_transitions[j]) = 1.0;
    b(row) = psi(po + j);
  }

  Eigen::VectorXd w0 = Eigen::VectorXd::Zero(nw);
  if (!first) w0.head(T) = s_prev;
  w0.segment(T, P) = m_prev + W * w0.head(T);
  const Eigen::VectorXd w = w0 + J.completeOrthogonalDecomposition().solve(b - J * w0);

  est.mismatch = (J * w - b).norm();
  est.consistent = est.mismatch <= 0.5;
  est.marking = round_marking(obs, w.segment(T, P));
  est.firing = w.tail(T).array().round().cast<int>().cwiseMax(0);
  return est;
}

Eigen::MatrixXd ResidualTrace::features(bool with_event) const {
  if (steps.empty()) return Eigen::MatrixXd(0, 0);
  const Index n = steps.front().rx.size(), r = steps.front().ry.size();
  const Index d = n + r + (with_event ? 1 : 0);
  Eigen::MatrixXd X(static_cast<Index>(steps.size()), d);
  for (size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const Index row = static_cast<Index>(i);
    X.block(row, 0, 1, n) = s.rx.transpose();
    X.block(row, n, 1, r) = s.ry.transpose();
    if (with_event) X(row, n + r) = s.rpsi_norm;
  }
  return X;
}

ResidualTrace generate_residuals(const Trajectory& traj, const ObserverGains& gains,
                                 const DiscreteObserverSpec& obs, const HybridModel& model,
                                 const ResidualOptions& options) {
  const Index n = model.n;
  if (static_cast<Index>(gains.L.size()) != model.num_modes())
    throw DimensionError("one observer gain per mode is required");
  if (obs.wD.rows() != model.blocks.wD.rows() || obs.wD.cols() != model.blocks.wD.cols())
    throw DimensionError("discrete observer does not match the model net");

  Eigen::VectorXd xhat = options.xhat0.size() ? options.xhat0 : Eigen::VectorXd::Zero(n);
  if (xhat.size() != n) throw DimensionError("xhat0 must have n entries");

  const Eigen::MatrixXd W = obs.wD.cast<double>();
  const Eigen::VectorXi m0 = model.net.initial.discrete;
  DiscreteEstimate est = initial_estimate(obs, m0);
  Eigen::VectorXi guard_marking = m0;
  const Index T = obs.num_transitions();
  std::vector<bool> measured_t(static_cast<size_t>(T), false);
  for (Index j : obs.measured_transitions) measured_t[static_cast<size_t>(j)] = true;

  ResidualTrace trace;
  trace.steps.reserve(traj.steps.size());
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    const StepRecord& rec = traj.steps[i];
    const Eigen::VectorXi& m_start = i == 0 ? m0 : traj.steps[i - 1].marking;
    est = discrete_observer_step(obs, est, obs.measure(m_start, rec.firing));

    auto predict = [&](const Eigen::VectorXi& marking) -> Eigen::VectorXi {
      try {
        return guard_firings(model, marking, xhat);
      } catch (const ConflictError&) {
        return Eigen::VectorXi::Zero(T);
      }
    };
    const Eigen::VectorXi sigma_hat = predict(est.marking);

    Index q = 0;
    if (options.mode_source == ModeSource::DiscreteObserver) {
      Eigen::VectorXi fired = est.firing;
      for (Index j = 0; j < T; ++j)
        if (!measured_t[static_cast<size_t>(j)]) fired(j) = sigma_hat(j);
      const Eigen::VectorXd after = (est.marking.cast<double>() + W * fired.cast<double>());
      q = 0;
      for (Index d = 1; d < static_cast<Index>(obs.mode_places.size()); ++d)
        if (after(obs.mode_places[d]) > after(obs.mode_places[q])) q = d;
    } else {
      const Eigen::VectorXi fired = predict(guard_marking);
      guard_marking = step_discrete(model.net, guard_marking, fired);
      q = active_mode(guard_marking);
    }
    const ModeLti& mode = model.modes[q];

    ResidualStep step;
    step.k = rec.k;
    step.mode_est = q;
    step.xhat = xhat;
    step.yhat = mode.C * xhat;
    step.rx = rec.x - xhat;
    step.ry = rec.y - step.yhat;
    step.rpsi = rec.firing.cast<double>() - sigma_hat.cast<double>();
    step.rpsi_norm = step.rpsi.lpNorm<1>();
    step.discrete_consistent = est.consistent;
    trace.steps.push_back(std::move(step));

    xhat = continuous_observer_step(xhat, rec.u, rec.y, mode, gains.L[static_cast<size_t>(q)]);
  }
  return trace;
}

}  // namespace etcpn
