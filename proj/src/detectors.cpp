#include "etcpn/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "etcpn/dsl.hpp"
#include "etcpn/errors.hpp"

namespace etcpn {

const char* to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::OcSvm: return "OC-SVM";
    case DetectorKind::Svdd: return "SVDD";
    case DetectorKind::EllipticEnvelope: return "EE";
  }
  return "?";
}

namespace {

void check_training_data(const Eigen::MatrixXd& X, Eigen::Index min_rows) {
  if (X.rows() < min_rows) throw ModelError("not enough training samples");
  if (X.cols() < 1) throw DimensionError("training data has no features");
  if (!X.allFinite()) throw ModelError("training data must be finite");
}

void check_nu(double nu) {
  if (!(nu > 0.0 && nu <= 1.0)) throw ModelError("nu must lie in (0, 1]");
}

}  // namespace

Eigen::VectorXd smo_solve(const Eigen::MatrixXd& Q, const Eigen::VectorXd& p, double c,
                          const SmoOptions& options, Eigen::VectorXd* grad, long* iterations,
                          double* gap_out) {
  const Eigen::Index N = Q.rows();
  if (Q.cols() != N || p.size() != N) throw DimensionError("smo_solve: Q must be N x N, p length N");
  if (N == 0) throw ModelError("smo_solve: empty problem");
  if (!(c * static_cast<double>(N) >= 1.0 - 1e-12)) throw ModelError("box too small for sum(alpha) = 1");

  // Feasible start: fill the first coefficients up to the box bound.
  Eigen::VectorXd a = Eigen::VectorXd::Zero(N);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < N && remaining > 0.0; ++i) {
    a(i) = std::min(c, remaining);
    remaining -= a(i);
  }
  Eigen::VectorXd g = Q * a + p;
  const double scale = std::max(Q.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const double tol = options.tol * scale;

  long it = 0;
  double gap = 0.0;
  for (;; ++it) {
    Eigen::Index up = -1, down = -1;
    for (Eigen::Index i = 0; i < N; ++i) {
      if (a(i) < c && (up < 0 || g(i) < g(up))) up = i;
      if (a(i) > 0.0 && (down < 0 || g(i) > g(down))) down = i;
    }
    gap = (up < 0 || down < 0) ? 0.0 : g(down) - g(up);
    if (gap <= tol) break;
    if (it >= options.max_iter) throw TrainingError("SMO did not converge", gap);
    const double eta = std::max(Q(up, up) + Q(down, down) - 2.0 * Q(up, down), 1e-12);
    double t = gap / eta;
    t = std::min({t, c - a(up), a(down)});
    a(up) += t;
    a(down) -= t;
    if (a(down) < 1e-15 * c) a(down) = 0.0;
    if (c - a(up) < 1e-15 * c) a(up) = c;
    g += t * (Q.col(up) - Q.col(down));
  }
  if (grad) *grad = g;
  if (iterations) *iterations = it;
  if (gap_out) *gap_out = gap;
  return a;
}

double scale_gamma(const Eigen::MatrixXd& X) {
  const double mean = X.mean();
  const double var = (X.array() - mean).square().mean();
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(X.cols()) * var);
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double gamma) {
  Eigen::MatrixXd K(X.rows(), Y.rows());
  for (Eigen::Index j = 0; j < Y.rows(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      K(i, j) = std::exp(-gamma * (X.row(i) - Y.row(j)).squaredNorm());
  return K;
}

namespace {

// Offset from the free coefficients, or the midpoint of the feasible interval.
// Free vectors lie on the boundary up to solver tolerance; the smallest gradient
// among them keeps all of them inside.
double offset_from_gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& g, double c) {
  double free_min = std::numeric_limits<double>::infinity();
  long free = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > 0.0 && a(i) < c) {
      free_min = std::min(free_min, g(i));
      ++free;
    } else if (a(i) >= c) {
      lo = std::max(lo, g(i));
    } else {
      hi = std::min(hi, g(i));
    }
  }
  if (free > 0) return free_min;
  if (!std::isfinite(lo)) return hi;
  if (!std::isfinite(hi)) return lo;
  return 0.5 * (lo + hi);
}

void keep_support(OneClassModel& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& a) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) > 0.0) idx.push_back(i);
  m.support.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
  m.alpha.resize(static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    m.support.row(static_cast<Eigen::Index>(k)) = X.row(idx[k]);
    m.alpha(static_cast<Eigen::Index>(k)) = a(idx[k]);
  }
}

}  // namespace

OneClassModel train_ocsvm(const Eigen::MatrixXd& X, double nu, std::optional<double> gamma,
                          const SmoOptions& options) {
  check_training_data(X, 1);
  check_nu(nu);
  OneClassModel m;
  m.kind = DetectorKind::OcSvm;
  m.dim = X.cols();
  m.nu = nu;
  m.gamma = gamma ? *gamma : scale_gamma(X);
  if (!(m.gamma > 0.0)) throw ModelError("gamma must be positive");
  const double c = 1.0 / (nu * static_cast<double>(X.rows()));
  const Eigen::MatrixXd K = rbf_kernel(X, X, m.gamma);
  Eigen::VectorXd g;
  const Eigen::VectorXd a =
      smo_solve(K, Eigen::VectorXd::Zero(X.rows()), c, options, &g, &m.iterations, &m.kkt_gap);
  m.rho = offset_from_gradient(a, g, c);
  keep_support(m, X, a);
  return m;
}

OneClassModel train_svdd(const Eigen::MatrixXd& X, double nu, double gamma,
                         const SmoOptions& options) {
  check_training_data(X, 1);
  check_nu(nu);
  if (!(gamma > 0.0)) throw ModelError("gamma must be positive");
  OneClassModel m;
  m.kind = DetectorKind::Svdd;
  m.dim = X.cols();
  m.nu = nu;
  m.gamma = gamma;
  const double c = 1.0 / (nu * static_cast<double>(X.rows()));
  const Eigen::MatrixXd K = rbf_kernel(X, X, gamma);
  Eigen::VectorXd g;
  const Eigen::VectorXd a =
      smo_solve(2.0 * K, -K.diagonal(), c, options, &g, &m.iterations, &m.kkt_gap);
  m.center_norm = a.dot(K * a);
  // For boundary vectors dist^2 = center_norm - g_i.
  m.radius2 = m.center_norm - offset_from_gradient(a, g, c);
  keep_support(m, X, a);
  return m;
}

OneClassModel train_ee(const Eigen::MatrixXd& X, double contamination) {
  check_training_data(X, X.cols() + 1);
  if (!(contamination > 0.0 && contamination < 0.5)) throw ModelError("contamination must lie in (0, 0.5)");
  OneClassModel m;
  m.kind = DetectorKind::EllipticEnvelope;
  m.dim = X.cols();
  m.contamination = contamination;
  const double N = static_cast<double>(X.rows());
  m.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - m.mean.transpose();
  m.covariance = centered.transpose() * centered / N;
  const double d = static_cast<double>(X.cols());
  const double lambda = 1e-6 * m.covariance.trace() / d;
  m.covariance.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(m.covariance);
  if (llt.info() != Eigen::Success || !(lambda > 0.0))
    throw ModelError("covariance is singular after shrinkage");
  m.precision = llt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));

  std::vector<double> dist(static_cast<size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd z = centered.row(i).transpose();
    dist[static_cast<size_t>(i)] = z.dot(m.precision * z);
  }
  std::sort(dist.begin(), dist.end());
  // Linear interpolation between order statistics.
  const double pos = (1.0 - contamination) * (N - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, dist.size() - 1);
  m.threshold = dist[lo] + (pos - static_cast<double>(lo)) * (dist[hi] - dist[lo]);
  return m;
}

double score(const OneClassModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.dim) throw DimensionError("feature dimension mismatch");
  switch (model.kind) {
    case DetectorKind::OcSvm:
    case DetectorKind::Svdd: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < model.support.rows(); ++i)
        s += model.alpha(i) * std::exp(-model.gamma * (model.support.row(i).transpose() - x).squaredNorm());
      if (model.kind == DetectorKind::OcSvm) return model.rho - s;
      return 1.0 - 2.0 * s + model.center_norm - model.radius2;
    }
    case DetectorKind::EllipticEnvelope: {
      const Eigen::VectorXd z = x - model.mean;
      return z.dot(model.precision * z) - model.threshold;
    }
  }
  return 0.0;
}

bool predict(const OneClassModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return score(model, x) > 0.0;
}

Eigen::VectorXd score_rows(const OneClassModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXd s(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) s(i) = score(model, X.row(i).transpose());
  return s;
}

namespace {

std::string scalar(double v) { return dsl::format_matrix(Eigen::MatrixXd::Constant(1, 1, v)); }

const char* file_kind(DetectorKind k) {
  switch (k) {
    case DetectorKind::OcSvm: return "ocsvm";
    case DetectorKind::Svdd: return "svdd";
    case DetectorKind::EllipticEnvelope: return "ee";
  }
  return "?";
}

}  // namespace

std::string save_model(const OneClassModel& m) {
  std::ostringstream os;
  os << "detector " << file_kind(m.kind) << "\n";
  os << "dim " << m.dim << "\n";
  if (m.kind == DetectorKind::EllipticEnvelope) {
    os << "contamination = " << scalar(m.contamination) << "\n";
    os << "mean = " << dsl::format_matrix(m.mean) << "\n";
    os << "covariance = " << dsl::format_matrix(m.covariance) << "\n";
    os << "threshold = " << scalar(m.threshold) << "\n";
  } else {
    os << "gamma = " << scalar(m.gamma) << "\n";
    os << "nu = " << scalar(m.nu) << "\n";
    os << "rho = " << scalar(m.rho) << "\n";
    os << "center_norm = " << scalar(m.center_norm) << "\n";
    os << "radius2 = " << scalar(m.radius2) << "\n";
    os << "alpha = " << dsl::format_matrix(m.alpha) << "\n";
    os << "support = " << dsl::format_matrix(m.support) << "\n";
  }
  return os.str();
}

OneClassModel load_model(const std::string& text) {
  OneClassModel m;
  std::istringstream is(text);
  std::string line;
  bool have_kind = false;
  auto matrix = [](const std::string& v) {
    auto parsed = dsl::parse_matrix(v);
    if (!parsed) throw ModelError("bad matrix literal in detector file");
    return *parsed;
  };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("detector ", 0) == 0) {
      const std::string k = line.substr(9);
      if (k == "ocsvm") m.kind = DetectorKind::OcSvm;
      else if (k == "svdd") m.kind = DetectorKind::Svdd;
      else if (k == "ee") m.kind = DetectorKind::EllipticEnvelope;
      else throw ModelError("unknown detector kind '" + k + "'");
      have_kind = true;
      continue;
    }
    if (line.rfind("dim ", 0) == 0) {
      m.dim = std::stol(line.substr(4));
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ModelError("malformed detector line: " + line);
    const std::string key = line.substr(0, eq);
    const Eigen::MatrixXd v = matrix(line.substr(eq + 3));
    auto one = [&]() {
      if (v.size() != 1) throw ModelError(key + " must be a scalar");
      return v(0, 0);
    };
    if (key == "contamination") m.contamination = one();
    else if (key == "mean") m.mean = v.reshaped();
    else if (key == "covariance") m.covariance = v;
    else if (key == "threshold") m.threshold = one();
    else if (key == "gamma") m.gamma = one();
    else if (key == "nu") m.nu = one();
    else if (key == "rho") m.rho = one();
    else if (key == "center_norm") m.center_norm = one();
    else if (key == "radius2") m.radius2 = one();
    else if (key == "alpha") m.alpha = v.reshaped();
    else if (key == "support") m.support = v;
    else throw ModelError("unknown detector key '" + key + "'");
  }
  if (!have_kind) throw ModelError("detector kind missing");
  if (m.kind == DetectorKind::EllipticEnvelope) {
    if (m.mean.size() != m.dim || m.covariance.rows() != m.dim || m.covariance.cols() != m.dim)
      throw DimensionError("elliptic envelope blocks do not match dim");
    Eigen::LLT<Eigen::MatrixXd> llt(m.covariance);
    if (llt.info() != Eigen::Success) throw ModelError("covariance is not positive definite");
    m.precision = llt.solve(Eigen::MatrixXd::Identity(m.dim, m.dim));
  } else {
    if (m.support.rows() != m.alpha.size() || (m.support.rows() > 0 && m.support.cols() != m.dim))
      throw DimensionError("support vectors do not match dim");
  }
  return m;
}

void DetectorConfig::validate() const {
  check_nu(nu_ocsvm);
  check_nu(nu_svdd);
  if (gamma_ocsvm && !(*gamma_ocsvm > 0.0)) throw ModelError("gamma must be positive");
  if (gamma_svdd && !(*gamma_svdd > 0.0)) throw ModelError("gamma must be positive");
  if (!(contamination > 0.0 && contamination < 0.5)) throw ModelError("contamination must lie in (0, 0.5)");
}

}  // namespace etcpn
