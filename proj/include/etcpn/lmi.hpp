#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "etcpn/net.hpp"

namespace etcpn {

/// M(v) = M_0 + sum_i v_i M_i with symmetric M_i.
template <typename Scalar>
struct AffineSymmetric {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mat constant;
  std::vector<Mat> coeffs;

  Index size() const { return constant.rows(); }

  Mat evaluate(const Vec& v) const {
    Mat out = constant;
    for (size_t i = 0; i < coeffs.size(); ++i)
      if (v(static_cast<Index>(i)) != Scalar(0)) out += v(static_cast<Index>(i)) * coeffs[i];
    return out;
  }
};

/// Requirement fn(v) >= margin * I.
struct LmiConstraint {
  std::string label;
  AffineSymmetric<double> fn;
};

/// Directed mode transitions q -> q' that the certificate must cover.
struct TransitionGraph {
  std::vector<std::pair<Index, Index>> edges;

  static TransitionGraph complete(Index num_modes, bool self_loops = true);
};

/// Matrix-valued decision variable sum_i v[offset + i] basis[i].
struct VariableBlock {
  Index offset = 0;
  Eigen::Index rows = 0, cols = 0;
  std::vector<Eigen::MatrixXd> basis;

  Eigen::MatrixXd value(const Eigen::VectorXd& v) const;
};

struct LmiOptions {
  double eps = 1e-6;        // synthesis margin
  double decay = 1.0;       // certify (A - L C) / decay instead of A - L C
  bool structured_g = true; // restrict G_q to {C_q G_q = Lambda C_q} for exact gain recovery
  long max_iter = 50000;
  std::uint64_t seed = 42;
  double cond_limit = 1e12; // reject nearly singular G_q
};

/// Switched-observer LMIs over T_q, G_q, F_q: for every edge (q, q')
///   [[T_q - G_q - G_q^T, G_q^T A_q^T - C_q^T F_q^T], [*, -T_q']] < 0
/// and T_q > 0. Stored as constraints -block >= eps I and T_q >= eps I.
struct LmiProblem {
  std::vector<ModeLti> modes;  // A already divided by the decay rate
  TransitionGraph graph;
  double decay = 1.0;
  Index num_vars = 0;
  std::vector<VariableBlock> T, G, F;
  std::vector<LmiConstraint> constraints;
};

LmiProblem assemble(const std::vector<ModeLti>& modes, const TransitionGraph& graph,
                    const LmiOptions& options = {});

struct LmiSolution {
  std::vector<Eigen::MatrixXd> T, G, F;
  Eigen::VectorXd v;
  double margin = 0.0;  // min over constraints of lambda_min
  long iterations = 0;
};

struct InfeasibilityReport {
  double best_margin = 0.0;
  long iterations = 0;
  std::vector<double> constraint_margins;  // at the best point
  std::string reason;
};

/// Outcome of the generic engine on a list of affine constraints.
struct EngineResult {
  Eigen::VectorXd v;  // best point seen
  double margin = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Alternating projections between {S_i = fn_i(v)} and {S_i >= I}, stopped
/// once every fn_i(v) >= eps I.
EngineResult solve_lmi_constraints(Index num_vars, const std::vector<LmiConstraint>& constraints,
                                   double eps, long max_iter, std::uint64_t seed);

/// Smallest eigenvalue of each constraint at v, recomputed from scratch.
std::vector<double> constraint_margins(const std::vector<LmiConstraint>& constraints,
                                       const Eigen::VectorXd& v);

std::variant<LmiSolution, InfeasibilityReport> solve_feasibility(const LmiProblem& problem,
                                                                 const LmiOptions& options = {});

/// Solves L (C G) = F C. Throws RecoveryError when C G loses row rank.
Eigen::MatrixXd recover_gain(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                             const Eigen::MatrixXd& C, double* residual = nullptr);

/// Gains of a solution, scaled back by the decay rate. Throws RecoveryError.
std::vector<Eigen::MatrixXd> recover_gains(const LmiProblem& problem, const LmiSolution& sol);

struct EdgeMargin {
  Index from = 0, to = 0;
  double max_eigenvalue = 0.0;  // of A_cl^T P_to A_cl - P_from
};

struct VerificationReport {
  std::vector<EdgeMargin> edges;
  std::vector<double> spectral_radius;
  std::vector<Eigen::MatrixXd> P;  // normalised to max eigenvalue 1
  bool p_found = false;
  bool passed = false;
  double margin = 0.0;  // -max over edges of max_eigenvalue
};

struct VerifyOptions {
  double eps_verify = 1e-8;
  long max_iter = 50000;
  std::uint64_t seed = 42;
};

/// Checks (A_q - L_q C_q)^T P_q' (A_q - L_q C_q) - P_q <= -eps_verify I on every
/// edge. Without `given_P` the P_q are searched with the LMI engine first.
VerificationReport verify_gains(const std::vector<ModeLti>& modes,
                                const std::vector<Eigen::MatrixXd>& L,
                                const TransitionGraph& graph, const VerifyOptions& options = {},
                                const std::optional<std::vector<Eigen::MatrixXd>>& given_P = {});

/// A_cl^T P' A_cl - P.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> lyapunov_difference(
    const Eigen::MatrixBase<Derived>& Acl, const Eigen::MatrixBase<Derived>& P,
    const Eigen::MatrixBase<Derived>& Pnext) {
  return Acl.transpose() * Pnext * Acl - P;
}

/// [[-P, A_cl^T], [A_cl, -P'^{-1}]], negative definite iff lyapunov_difference is (for P' > 0).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> schur_form(
    const Eigen::MatrixBase<Derived>& Acl, const Eigen::MatrixBase<Derived>& P,
    const Eigen::MatrixBase<Derived>& Pnext) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = Acl.rows();
  Mat out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = -P;
  out.topRightCorner(n, n) = Acl.transpose();
  out.bottomLeftCorner(n, n) = Acl;
  out.bottomRightCorner(n, n) = -Mat(Pnext).inverse();
  return out;
}

/// (T - G - G^T) - (-G^T T^{-1} G); positive semidefinite whenever T > 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> congruence_gap(
    const Eigen::MatrixBase<Derived>& G, const Eigen::MatrixBase<Derived>& T) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Mat tinv_g = Mat(T).ldlt().solve(Mat(G));
  return T - G - G.transpose() + G.transpose() * tinv_g;
}

/// The block matrix of one edge evaluated at given T_q, G_q, F_q, T_q'.
Eigen::MatrixXd stability_block(const ModeLti& mode, const Eigen::MatrixXd& T,
                              const Eigen::MatrixXd& G, const Eigen::MatrixXd& F,
                              const Eigen::MatrixXd& Tnext);

/// Plain-text dumps in the model file number format.
std::string dump(const LmiProblem& problem);
std::string dump(const LmiSolution& solution);

}  // namespace etcpn
