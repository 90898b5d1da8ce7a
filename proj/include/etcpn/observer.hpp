#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "etcpn/net.hpp"
#include "etcpn/simulator.hpp"

namespace etcpn {

/// Per-mode observer gains L_q (n x r) and, when certified, the Lyapunov
/// matrices P_q (n x n, symmetric positive definite).
struct ObserverGains {
  std::vector<Eigen::MatrixXd> L;
  std::vector<Eigen::MatrixXd> P;  // empty when not certified

  bool certified() const { return !P.empty(); }
};

/// x^+ = A_q x + B_q u + L_q (y - C_q x).
Eigen::VectorXd continuous_observer_step(const Eigen::VectorXd& xhat, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& y, const ModeLti& mode,
                                         const Eigen::MatrixXd& L);

/// Observer incidence over the places [u; y; xhat]:
/// [[I_{p+r}, 0], [[B L], A - L C]] - I.
Eigen::MatrixXd observer_incidence(const ModeLti& mode, const Eigen::MatrixXd& L);

/// Marking/firing estimator for the discrete subnet.
///
/// Y(k) = [M(k); sigma(k)] stacks the marking at the start of step k and the
/// firing of step k, so M(k+1) = M(k) + W sigma(k), i.e. A Y(k+1) = E Y(k)
/// with E = [I | W] and A = [I | 0]. The measurement is psi(k) = H Y(k).
struct DiscreteObserverSpec {
  Eigen::MatrixXi wD;
  std::vector<Index> measured_places;
  std::vector<Index> measured_transitions;
  // Places that encode the active mode; the estimate is kept one-hot over them.
  std::vector<Index> mode_places;

  Eigen::MatrixXd E, A, H;
  // Fully measured nets: Mhat(k+1) = F Mhat(k) + G psi(k), Yhat(k) = R Mhat(k) + N psi(k)
  // with F = 0, G = [I 0], R = 0, N = I. Left empty otherwise.
  Eigen::MatrixXd F, G, R, N;

  Index num_places() const { return wD.rows(); }
  Index num_transitions() const { return wD.cols(); }
  bool fully_measured() const;
  /// Measurement H [M; sigma].
  Eigen::VectorXd measure(const Eigen::VectorXi& marking, const Eigen::VectorXi& firing) const;
};

/// Builds E, A, H (and the pass-through gains when everything is measured).
/// Every discrete place is a mode place unless `mode_places` is given.
DiscreteObserverSpec make_discrete_observer(const Eigen::MatrixXi& wD,
                                            std::vector<Index> measured_places,
                                            std::vector<Index> measured_transitions,
                                            std::optional<std::vector<Index>> mode_places = {});

/// Fully measured observer for the mode net of a hybrid model.
DiscreteObserverSpec make_discrete_observer(const HybridModel& model);

struct DiscreteEstimate {
  Eigen::VectorXi marking;  // Mhat(k)
  Eigen::VectorXi firing;   // sigmahat(k), measured entries only
  Eigen::VectorXd previous_psi;
  // Norm of the measurement/conservation mismatch before rounding.
  double mismatch = 0.0;
  bool consistent = true;
};

/// Estimate seeded with a known initial marking.
DiscreteEstimate initial_estimate(const DiscreteObserverSpec& obs, const Eigen::VectorXi& m0);

/// Advances the estimate with psi(k). With hidden components, [sigma(k-1); M(k); sigma(k)]
/// is reconstructed in least squares from the conservation law and the
/// measurements of steps k-1 and k, then rounded to nonnegative integers.
DiscreteEstimate discrete_observer_step(const DiscreteObserverSpec& obs,
                                        const DiscreteEstimate& previous,
                                        const Eigen::VectorXd& psi);

struct ResidualStep {
  long k = 0;
  Index mode_est = 0;
  Eigen::VectorXd xhat;  // xhat(k)
  Eigen::VectorXd yhat;  // C_qhat xhat(k)
  Eigen::VectorXd rx;    // x - xhat
  Eigen::VectorXd ry;    // y - yhat
  Eigen::VectorXd rpsi;  // observed minus predicted firing
  double rpsi_norm = 0.0;
  bool discrete_consistent = true;
};

struct ResidualTrace {
  std::vector<ResidualStep> steps;

  long size() const { return static_cast<long>(steps.size()); }
  /// Detector features, one row per step: [r_x, r_y] or [r_x, r_y, |r_psi|_1].
  Eigen::MatrixXd features(bool with_event) const;
};

enum class ModeSource { DiscreteObserver, Guards };

struct ResidualOptions {
  Eigen::VectorXd xhat0;  // empty: zero
  ModeSource mode_source = ModeSource::DiscreteObserver;
};

/// Runs the discrete and continuous observers in lockstep over a trajectory.
ResidualTrace generate_residuals(const Trajectory& traj, const ObserverGains& gains,
                                 const DiscreteObserverSpec& obs, const HybridModel& model,
                                 const ResidualOptions& options = {});

}  // namespace etcpn
