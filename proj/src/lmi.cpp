#include "etcpn/lmi.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "etcpn/dsl.hpp"

namespace etcpn {

TransitionGraph TransitionGraph::complete(Index num_modes, bool self_loops) {
  TransitionGraph g;
  for (Index q = 0; q < num_modes; ++q)
    for (Index s = 0; s < num_modes; ++s)
      if (self_loops || q != s) g.edges.emplace_back(q, s);
  return g;
}

Eigen::MatrixXd VariableBlock::value(const Eigen::VectorXd& v) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  for (size_t i = 0; i < basis.size(); ++i) out += v(offset + static_cast<Index>(i)) * basis[i];
  return out;
}

namespace {

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

VariableBlock symmetric_block(Index offset, Index n) {
  VariableBlock b;
  b.offset = offset;
  b.rows = b.cols = n;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
      e(i, j) = 1.0;
      e(j, i) = 1.0;
      b.basis.push_back(e);
    }
  }
  return b;
}

VariableBlock full_block(Index offset, Index rows, Index cols) {
  VariableBlock b;
  b.offset = offset;
  b.rows = rows;
  b.cols = cols;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(rows, cols);
      e(i, j) = 1.0;
      b.basis.push_back(e);
    }
  }
  return b;
}

// Orthonormal basis of {G : C G = Lambda C for some Lambda}.
VariableBlock structured_g_block(Index offset, const Eigen::MatrixXd& C) {
  const Index n = C.cols(), r = C.rows();
  if (r == 0 || C.isZero(0.0) || r >= n) return full_block(offset, n, n);
  const Index nz = n * n + r * r;
  Eigen::MatrixXd K(r * n, nz);
  for (Index z = 0; z < nz; ++z) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd Lam = Eigen::MatrixXd::Zero(r, r);
    if (z < n * n) G(z % n, z / n) = 1.0;
    else Lam((z - n * n) % r, (z - n * n) / r) = 1.0;
    const Eigen::MatrixXd img = C * G - Lam * C;
    K.col(z) = Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeFullV);
  svd.setThreshold(1e-12);
  const Index rank = svd.rank();
  const Eigen::MatrixXd null = svd.matrixV().rightCols(nz - rank);
  Eigen::MatrixXd gpart = null.topRows(n * n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gpart);
  qr.setThreshold(1e-10);
  const Index dim = qr.rank();
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n * n, dim);

  VariableBlock b;
  b.offset = offset;
  b.rows = b.cols = n;
  for (Index k = 0; k < dim; ++k) {
    Eigen::MatrixXd e = Eigen::Map<const Eigen::MatrixXd>(Q.col(k).data(), n, n);
    e = (e.array().abs() < 1e-14).select(0.0, e);
    b.basis.push_back(e);
  }
  return b;
}

AffineSymmetric<double> linear_from(Index num_vars,
                                    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f) {
  AffineSymmetric<double> a;
  a.constant = f(Eigen::VectorXd::Zero(num_vars));
  for (Index i = 0; i < num_vars; ++i) {
    Eigen::MatrixXd c = f(Eigen::VectorXd::Unit(num_vars, i)) - a.constant;
    a.coeffs.push_back(0.5 * (c + c.transpose()));
  }
  return a;
}

}  // namespace

Eigen::MatrixXd stability_block(const ModeLti& mode, const Eigen::MatrixXd& T,
                              const Eigen::MatrixXd& G, const Eigen::MatrixXd& F,
                              const Eigen::MatrixXd& Tnext) {
  const Index n = mode.A.rows();
  Eigen::MatrixXd m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = T - G - G.transpose();
  m.topRightCorner(n, n) = G.transpose() * mode.A.transpose() - mode.C.transpose() * F.transpose();
  m.bottomLeftCorner(n, n) = m.topRightCorner(n, n).transpose();
  m.bottomRightCorner(n, n) = -Tnext;
  return m;
}

LmiProblem assemble(const std::vector<ModeLti>& modes, const TransitionGraph& graph,
                    const LmiOptions& options) {
  if (modes.empty()) throw ModelError("LMI assembly needs at least one mode");
  if (graph.edges.empty()) throw ModelError("transition graph has no edges");
  if (!(options.decay > 0.0)) throw ModelError("decay rate must be positive");
  const Index n = modes.front().A.rows(), r = modes.front().C.rows();
  const Index Q = static_cast<Index>(modes.size());
  for (const auto& m : modes)
    if (m.A.rows() != n || m.A.cols() != n || m.C.rows() != r || m.C.cols() != n)
      throw DimensionError("all modes must share n and r");
  for (auto [a, b] : graph.edges)
    if (a < 0 || a >= Q || b < 0 || b >= Q) throw DimensionError("edge refers to an unknown mode");

  LmiProblem p;
  p.graph = graph;
  p.decay = options.decay;
  p.modes = modes;
  for (auto& m : p.modes) m.A /= options.decay;

  Index offset = 0;
  for (Index q = 0; q < Q; ++q) {
    p.T.push_back(symmetric_block(offset, n));
    offset += static_cast<Index>(p.T.back().basis.size());
    p.G.push_back(options.structured_g ? structured_g_block(offset, p.modes[q].C)
                                       : full_block(offset, n, n));
    offset += static_cast<Index>(p.G.back().basis.size());
    p.F.push_back(full_block(offset, n, r));
    offset += static_cast<Index>(p.F.back().basis.size());
  }
  p.num_vars = offset;

  for (auto [a, b] : graph.edges) {
    const ModeLti& mode = p.modes[a];
    auto fn = [&, a = a, b = b](const Eigen::VectorXd& v) -> Eigen::MatrixXd {
      return -stability_block(mode, p.T[a].value(v), p.G[a].value(v), p.F[a].value(v),
                            p.T[b].value(v));
    };
    p.constraints.push_back({"edge " + std::to_string(a + 1) + "->" + std::to_string(b + 1),
                             linear_from(p.num_vars, fn)});
  }
  for (Index q = 0; q < Q; ++q) {
    auto fn = [&, q](const Eigen::VectorXd& v) -> Eigen::MatrixXd { return p.T[q].value(v); };
    p.constraints.push_back({"T" + std::to_string(q + 1) + " > 0", linear_from(p.num_vars, fn)});
  }
  return p;
}

std::vector<double> constraint_margins(const std::vector<LmiConstraint>& constraints,
                                       const Eigen::VectorXd& v) {
  std::vector<double> out;
  out.reserve(constraints.size());
  for (const auto& c : constraints) out.push_back(min_eigenvalue(c.fn.evaluate(v)));
  return out;
}

EngineResult solve_lmi_constraints(Index num_vars, const std::vector<LmiConstraint>& constraints,
                                   double eps, long max_iter, std::uint64_t seed) {
  struct Flat {
    Eigen::MatrixXd phi;  // columns vec(M_i)
    Eigen::VectorXd c;
    Index m;
  };
  std::vector<Flat> flat;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(num_vars, num_vars);
  for (const auto& con : constraints) {
    const Index m = con.fn.size();
    Flat f;
    f.m = m;
    f.c = Eigen::Map<const Eigen::VectorXd>(con.fn.constant.data(), m * m);
    f.phi.resize(m * m, num_vars);
    for (Index i = 0; i < num_vars; ++i)
      f.phi.col(i) = Eigen::Map<const Eigen::VectorXd>(con.fn.coeffs[static_cast<size_t>(i)].data(), m * m);
    gram += f.phi.transpose() * f.phi;
    flat.push_back(std::move(f));
  }
  const Eigen::LLT<Eigen::MatrixXd> chol(gram);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(num_vars);
  for (Index i = 0; i < num_vars; ++i) v(i) = gauss(rng);

  auto evaluate = [&](const Eigen::VectorXd& x, std::vector<Eigen::MatrixXd>& vals) {
    vals.resize(flat.size());
    for (size_t k = 0; k < flat.size(); ++k) {
      Eigen::VectorXd s = flat[k].c + flat[k].phi * x;
      vals[k] = Eigen::Map<Eigen::MatrixXd>(s.data(), flat[k].m, flat[k].m);
      vals[k] = 0.5 * (vals[k] + vals[k].transpose()).eval();
    }
  };

  EngineResult res;
  res.v = v;
  res.margin = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> vals;
  std::vector<Eigen::MatrixXd> targets(flat.size());
  evaluate(v, vals);

  for (long it = 0; it <= max_iter; ++it) {
    double margin = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < flat.size(); ++k) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(vals[k]);
      const Eigen::VectorXd lam = es.eigenvalues();
      margin = std::min(margin, lam(0));
      // Projection onto {S >= I}.
      const Eigen::VectorXd shifted = lam.array().max(1.0).matrix();
      targets[k] = es.eigenvectors() * shifted.asDiagonal() * es.eigenvectors().transpose();
    }
    if (margin > res.margin) {
      res.margin = margin;
      res.v = v;
    }
    res.iterations = it;
    if (margin >= eps) {
      res.converged = true;
      break;
    }
    if (it == max_iter) break;
    Eigen::VectorXd rhs = v;
    for (size_t k = 0; k < flat.size(); ++k) {
      const Eigen::Map<const Eigen::VectorXd> t(targets[k].data(), targets[k].size());
      rhs += flat[k].phi.transpose() * (t - flat[k].c);
    }
    v = chol.solve(rhs);
    evaluate(v, vals);
  }
  return res;
}

std::variant<LmiSolution, InfeasibilityReport> solve_feasibility(const LmiProblem& problem,
                                                                 const LmiOptions& options) {
  const EngineResult res = solve_lmi_constraints(problem.num_vars, problem.constraints, options.eps,
                                                 options.max_iter, options.seed);
  InfeasibilityReport report;
  report.iterations = res.iterations;
  report.best_margin = res.margin;
  report.constraint_margins = constraint_margins(problem.constraints, res.v);
  if (!res.converged) {
    report.reason = "no point with margin >= eps within the iteration budget";
    return report;
  }

  LmiSolution sol;
  sol.v = res.v;
  sol.iterations = res.iterations;
  const Index Q = static_cast<Index>(problem.modes.size());
  for (Index q = 0; q < Q; ++q) {
    sol.T.push_back(problem.T[q].value(res.v));
    sol.G.push_back(problem.G[q].value(res.v));
    sol.F.push_back(problem.F[q].value(res.v));
  }

  // Independent re-check from the recovered matrices.
  double margin = std::numeric_limits<double>::infinity();
  for (auto [a, b] : problem.graph.edges)
    margin = std::min(margin, min_eigenvalue(-stability_block(problem.modes[a], sol.T[a], sol.G[a],
                                                            sol.F[a], sol.T[b])));
  for (const auto& t : sol.T) margin = std::min(margin, min_eigenvalue(0.5 * (t + t.transpose())));
  sol.margin = margin;
  if (margin < options.eps) {
    report.reason = "re-check at the returned point found margin " + std::to_string(margin);
    return report;
  }
  for (Index q = 0; q < Q; ++q) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sol.G[q]);
    const auto& s = svd.singularValues();
    const double cond = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= options.cond_limit)) {
      report.reason = "G" + std::to_string(q + 1) + " is nearly singular";
      return report;
    }
  }
  return sol;
}

Eigen::MatrixXd recover_gain(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                             const Eigen::MatrixXd& C, double* residual) {
  const Index n = G.rows(), r = C.rows();
  if (G.cols() != n || C.cols() != n || F.rows() != n || F.cols() != r)
    throw DimensionError("recover_gain: expected F n x r, G n x n, C r x n");
  const Eigen::MatrixXd CG = C * G;
  const Eigen::MatrixXd FC = F * C;
  // L CG = FC  <=>  CG^T L^T = FC^T
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(CG.transpose());
  const Eigen::MatrixXd L = cod.solve(FC.transpose()).transpose();
  const double res = (L * CG - FC).norm();
  if (residual) *residual = res;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(CG);
  qr.setThreshold(1e-12);
  if (qr.rank() < r) throw RecoveryError("C G is rank deficient", res);
  return L;
}

std::vector<Eigen::MatrixXd> recover_gains(const LmiProblem& problem, const LmiSolution& sol) {
  std::vector<Eigen::MatrixXd> gains;
  for (size_t q = 0; q < problem.modes.size(); ++q) {
    double res = 0.0;
    Eigen::MatrixXd L = recover_gain(sol.F[q], sol.G[q], problem.modes[q].C, &res);
    const double scale = (sol.F[q] * problem.modes[q].C).norm() + 1.0;
    if (res > 1e-8 * scale)
      throw RecoveryError("F C = L C G has no exact solution for mode " + std::to_string(q + 1), res);
    gains.push_back(problem.decay * L);
  }
  return gains;
}

VerificationReport verify_gains(const std::vector<ModeLti>& modes,
                                const std::vector<Eigen::MatrixXd>& L,
                                const TransitionGraph& graph, const VerifyOptions& options,
                                const std::optional<std::vector<Eigen::MatrixXd>>& given_P) {
  if (L.size() != modes.size()) throw DimensionError("one gain per mode is required");
  const Index Q = static_cast<Index>(modes.size());
  std::vector<Eigen::MatrixXd> Acl;
  VerificationReport rep;
  for (Index q = 0; q < Q; ++q) {
    const auto& m = modes[q];
    if (L[q].rows() != m.A.rows() || L[q].cols() != m.C.rows())
      throw DimensionError("gain of mode " + std::to_string(q + 1) + " must be n x r");
    Acl.push_back(m.A - L[q] * m.C);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Acl.back(), false);
    rep.spectral_radius.push_back(es.eigenvalues().cwiseAbs().maxCoeff());
  }

  if (given_P) {
    if (static_cast<Index>(given_P->size()) != Q) throw DimensionError("one P per mode is required");
    rep.P = *given_P;
    rep.p_found = true;
  } else {
    const Index n = modes.front().A.rows();
    std::vector<VariableBlock> P;
    Index offset = 0;
    for (Index q = 0; q < Q; ++q) {
      P.push_back(symmetric_block(offset, n));
      offset += static_cast<Index>(P.back().basis.size());
    }
    std::vector<LmiConstraint> cons;
    for (auto [a, b] : graph.edges) {
      auto fn = [&, a = a, b = b](const Eigen::VectorXd& v) -> Eigen::MatrixXd {
        return -lyapunov_difference(Acl[a], P[a].value(v), P[b].value(v));
      };
      cons.push_back({"edge", linear_from(offset, fn)});
    }
    for (Index q = 0; q < Q; ++q) {
      auto fn = [&, q](const Eigen::VectorXd& v) -> Eigen::MatrixXd { return P[q].value(v); };
      cons.push_back({"P > 0", linear_from(offset, fn)});
    }
    const EngineResult res =
        solve_lmi_constraints(offset, cons, options.eps_verify, options.max_iter, options.seed);
    rep.p_found = res.converged;
    double top = 0.0;
    for (Index q = 0; q < Q; ++q) {
      rep.P.push_back(P[q].value(res.v));
      top = std::max(top, max_eigenvalue(rep.P.back()));
    }
    if (top > 0.0)
      for (auto& p : rep.P) p /= top;
  }

  double worst = -std::numeric_limits<double>::infinity();
  for (auto [a, b] : graph.edges) {
    const double e = max_eigenvalue(lyapunov_difference(Acl[a], rep.P[a], rep.P[b]));
    rep.edges.push_back({a, b, e});
    worst = std::max(worst, e);
  }
  bool positive = true;
  for (const auto& p : rep.P) positive = positive && min_eigenvalue(p) > 0.0;
  rep.margin = -worst;
  rep.passed = rep.p_found && positive && worst <= -options.eps_verify;
  return rep;
}

std::string dump(const LmiProblem& problem) {
  std::ostringstream os;
  os << "# variables " << problem.num_vars << "\n";
  os << "# decay " << dsl::format_matrix(Eigen::MatrixXd::Constant(1, 1, problem.decay)) << "\n";
  for (const auto& c : problem.constraints) {
    os << "constraint " << c.label << "\n";
    os << "  M0 = " << dsl::format_matrix(c.fn.constant) << "\n";
    for (size_t i = 0; i < c.fn.coeffs.size(); ++i)
      if (!c.fn.coeffs[i].isZero(0.0)) os << "  M" << i + 1 << " = " << dsl::format_matrix(c.fn.coeffs[i]) << "\n";
  }
  return os.str();
}

std::string dump(const LmiSolution& solution) {
  std::ostringstream os;
  os << "# margin " << dsl::format_matrix(Eigen::MatrixXd::Constant(1, 1, solution.margin))
     << " iterations " << solution.iterations << "\n";
  for (size_t q = 0; q < solution.T.size(); ++q) {
    os << "T" << q + 1 << " = " << dsl::format_matrix(solution.T[q]) << "\n";
    os << "G" << q + 1 << " = " << dsl::format_matrix(solution.G[q]) << "\n";
    os << "F" << q + 1 << " = " << dsl::format_matrix(solution.F[q]) << "\n";
  }
  return os.str();
}

}  // namespace etcpn
