#include <gtest/gtest.h>

#include <random>

#include "etcpn/lmi.hpp"
#include "support.hpp"

using namespace etcpn;
using etcpn::testing::benchmark_modes;
using etcpn::testing::random_matrix;
using etcpn::testing::random_spd;

namespace {

double min_eig(const Eigen::MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (M + M.transpose())).eigenvalues().minCoeff();
}
double max_eig(const Eigen::MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (M + M.transpose())).eigenvalues().maxCoeff();
}

AffineSymmetric<double> affine(Eigen::MatrixXd c, std::vector<Eigen::MatrixXd> coeffs) {
  AffineSymmetric<double> f;
  f.constant = std::move(c);
  f.coeffs = std::move(coeffs);
  return f;
}

}  // namespace

TEST(Affine, Evaluate) {
  const auto f = affine(Eigen::Matrix2d::Identity(), {Eigen::Matrix2d::Ones(), Eigen::Matrix2d::Zero()});
  const Eigen::MatrixXd m = f.evaluate(Eigen::Vector2d(2, 5));
  EXPECT_EQ(m, (Eigen::Matrix2d() << 3, 2, 2, 3).finished());
}

TEST(Engine, FindsAnInteriorPoint) {
  // diag(v, 1 - v) >= eps I
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  c(1, 1) = 1;
  Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
  d(0, 0) = 1;
  d(1, 1) = -1;
  const std::vector<LmiConstraint> cons = {{"box", affine(c, {d})}};
  const EngineResult r = solve_lmi_constraints(1, cons, 1e-3, 10000, 1);
  ASSERT_TRUE(r.converged);
  EXPECT_GE(r.v(0), 1e-3 - 1e-12);
  EXPECT_LE(r.v(0), 1 - 1e-3 + 1e-12);
  EXPECT_GE(constraint_margins(cons, r.v)[0], 1e-3 - 1e-12);
}

TEST(Engine, ReportsInfeasibility) {
  // v >= eps and -v >= eps
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const std::vector<LmiConstraint> cons = {{"pos", affine(Eigen::MatrixXd::Zero(1, 1), {one})},
                                           {"neg", affine(Eigen::MatrixXd::Zero(1, 1), {-one})}};
  const EngineResult r = solve_lmi_constraints(1, cons, 1e-6, 2000, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.margin, 1e-12);
}

TEST(StabilityBlock, MatchesHandAssembly) {
  std::mt19937_64 rng(9);
  const auto modes = benchmark_modes();
  const Eigen::MatrixXd T = random_spd(2, rng), Tn = random_spd(2, rng);
  const Eigen::MatrixXd G = random_matrix(2, 2, rng), F = random_matrix(2, 1, rng);
  const Eigen::MatrixXd M = stability_block(modes[0], T, G, F, Tn);
  ASSERT_EQ(M.rows(), 4);
  const Eigen::MatrixXd off = G.transpose() * modes[0].A.transpose() - modes[0].C.transpose() * F.transpose();
  EXPECT_LE((M.topLeftCorner(2, 2) - (T - G - G.transpose())).norm(), 1e-14);
  EXPECT_LE((M.topRightCorner(2, 2) - off).norm(), 1e-14);
  EXPECT_LE((M.bottomLeftCorner(2, 2) - off.transpose()).norm(), 1e-14);
  EXPECT_LE((M.bottomRightCorner(2, 2) + Tn).norm(), 1e-14);
}

TEST(Assemble, ConstraintInventory) {
  const auto modes = benchmark_modes();
  const LmiProblem p = assemble(modes, TransitionGraph::complete(2));
  EXPECT_EQ(p.graph.edges.size(), 4u);
  EXPECT_EQ(p.constraints.size(), 6u);
  ASSERT_EQ(p.T.size(), 2u);
  EXPECT_EQ(p.T[0].rows, 2);
  EXPECT_EQ(p.F[0].cols, 1);
  EXPECT_GT(p.num_vars, 0);
  EXPECT_FALSE(dump(p).empty());
  EXPECT_EQ(TransitionGraph::complete(3, false).edges.size(), 6u);
  // Structured G keeps C G proportional to C.
  std::mt19937_64 rng(4);
  const Eigen::VectorXd v = random_matrix(p.num_vars, 1, rng);
  for (int q = 0; q < 2; ++q) {
    const Eigen::MatrixXd CG = modes[q].C * p.G[q].value(v);
    EXPECT_LE(std::abs(CG(0, 0)), 1e-12);
  }
}

TEST(SolveFeasibility, BenchmarkGainsPassTheVerifier) {
  const auto modes = benchmark_modes();
  const TransitionGraph graph = TransitionGraph::complete(2);
  const LmiProblem p = assemble(modes, graph);
  const auto res = solve_feasibility(p);
  ASSERT_TRUE(std::holds_alternative<LmiSolution>(res));
  const auto& sol = std::get<LmiSolution>(res);
  EXPECT_GE(sol.margin, 1e-6);
  // Re-derive every block from the returned matrices.
  for (auto [a, b] : graph.edges)
    EXPECT_LT(max_eig(stability_block(modes[a], sol.T[a], sol.G[a], sol.F[a], sol.T[b])), 0.0);
  for (const auto& t : sol.T) EXPECT_GT(min_eig(t), 0.0);
  EXPECT_FALSE(dump(sol).empty());

  const auto L = recover_gains(p, sol);
  ASSERT_EQ(L.size(), 2u);
  for (int q = 0; q < 2; ++q) {
    double residual = -1;
    recover_gain(sol.F[q], sol.G[q], modes[q].C, &residual);
    EXPECT_LE(residual, 1e-8);
  }
  const VerificationReport rep = verify_gains(modes, L, graph);
  EXPECT_TRUE(rep.passed);
  EXPECT_TRUE(rep.p_found);
  for (double rho : rep.spectral_radius) EXPECT_LT(rho, 1.0);
  // With P_q = T_q^{-1} the certificate also holds directly.
  std::vector<Eigen::MatrixXd> P;
  for (const auto& t : sol.T) P.push_back(t.inverse());
  for (auto [a, b] : graph.edges) {
    const Eigen::MatrixXd Acl = modes[a].A - L[a] * modes[a].C;
    EXPECT_LT(max_eig(lyapunov_difference(Acl, P[a], P[b])), 0.0);
  }
}

TEST(SolveFeasibility, DecayRateScalesTheCertificate) {
  const auto modes = benchmark_modes();
  const TransitionGraph graph = TransitionGraph::complete(2);
  LmiOptions opts;
  opts.decay = 0.6;
  const LmiProblem p = assemble(modes, graph, opts);
  const auto res = solve_feasibility(p, opts);
  ASSERT_TRUE(std::holds_alternative<LmiSolution>(res));
  const auto L = recover_gains(p, std::get<LmiSolution>(res));
  // (A - L C) / 0.6 must be certified on its own.
  std::vector<ModeLti> scaled = modes;
  std::vector<Eigen::MatrixXd> Ls;
  for (int q = 0; q < 2; ++q) {
    scaled[q].A /= 0.6;
    Ls.push_back(L[q] / 0.6);
  }
  EXPECT_TRUE(verify_gains(scaled, Ls, graph).passed);
}

TEST(SolveFeasibility, UndetectableModelIsInfeasible) {
  ModeLti m;
  m.A = (Eigen::Matrix2d() << 2, 0, 0, 0.5).finished();
  m.B = Eigen::Vector2d(1, 0);
  m.C = Eigen::RowVector2d(0, 1);
  LmiOptions opts;
  opts.max_iter = 5000;
  const LmiProblem p = assemble({m}, TransitionGraph::complete(1), opts);
  const auto res = solve_feasibility(p, opts);
  ASSERT_TRUE(std::holds_alternative<InfeasibilityReport>(res));
  const auto& rep = std::get<InfeasibilityReport>(res);
  EXPECT_LT(rep.best_margin, 0.0);
  EXPECT_EQ(rep.constraint_margins.size(), p.constraints.size());
  EXPECT_FALSE(rep.reason.empty());
}

TEST(RecoverGain, ExactAndRankDeficient) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd C = random_matrix(2, 3, rng);
  const Eigen::MatrixXd G = random_matrix(3, 3, rng);
  const Eigen::MatrixXd Ltrue = random_matrix(3, 2, rng);
  // Choose F so that L (C G) = F C has the exact solution Ltrue: F C = Ltrue C G needs C G = Lambda C.
  const Eigen::Matrix2d Lambda = random_matrix(2, 2, rng);
  const Eigen::MatrixXd Gs = C.completeOrthogonalDecomposition().solve(Lambda * C);
  ASSERT_LE((C * Gs - Lambda * C).norm(), 1e-10);
  const Eigen::MatrixXd F = Ltrue * Lambda;
  double residual = -1;
  const Eigen::MatrixXd L = recover_gain(F, Gs, C, &residual);
  EXPECT_LE((L - Ltrue).norm(), 1e-8);
  EXPECT_LE(residual, 1e-9);
  EXPECT_THROW(recover_gain(F, Eigen::MatrixXd::Zero(3, 3), C), RecoveryError);
  (void)G;
}

TEST(Verify, PrintedGainsAndBadGains) {
  const auto modes = benchmark_modes();
  const TransitionGraph graph = TransitionGraph::complete(2);
  const VerificationReport ok = verify_gains(modes, etcpn::testing::printed_gains(), graph);
  EXPECT_TRUE(ok.passed);
  EXPECT_GE(ok.margin, 1e-8);
  double top = 0;
  for (const auto& P : ok.P) top = std::max(top, max_eig(P));
  EXPECT_NEAR(top, 1.0, 1e-12);
  VerifyOptions quick;
  quick.max_iter = 3000;
  const std::vector<Eigen::MatrixXd> zero = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  EXPECT_FALSE(verify_gains(modes, zero, graph, quick).passed);
  const std::vector<Eigen::MatrixXd> identity = {Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()};
  const auto given = verify_gains(modes, zero, graph, quick, identity);
  EXPECT_FALSE(given.passed);  // rotations keep x^T x constant
  EXPECT_NEAR(given.margin, 0.0, 1e-12);
  EXPECT_THROW(verify_gains(modes, {zero[0]}, graph), DimensionError);
}

TEST(Properties, CongruenceBoundOnRandomProbes) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const Index n = 1 + static_cast<Index>(rng() % 4);
    const Eigen::MatrixXd T = random_spd(n, rng, 1e-2);
    const Eigen::MatrixXd G = random_matrix(n, n, rng, 2.0);
    EXPECT_GE(min_eig(congruence_gap(G, T)), -1e-10);
    // Equality at G = T.
    EXPECT_LE(congruence_gap(T, T).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Properties, SchurFormAgreesWithLyapunovDifference) {
  std::mt19937_64 rng(22);
  int feasible = 0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::MatrixXd P = random_spd(2, rng, 0.05), Pn = random_spd(2, rng, 0.05);
    const Eigen::MatrixXd Acl = random_matrix(2, 2, rng, 0.4);
    const bool lyap = max_eig(lyapunov_difference(Acl, P, Pn)) < 0;
    const bool schur = max_eig(schur_form(Acl, P, Pn)) < 0;
    EXPECT_EQ(lyap, schur);
    feasible += lyap;
  }
  EXPECT_GT(feasible, 10);
  EXPECT_LT(feasible, 190);
}
