#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace etcpn {

enum class DetectorKind { OcSvm, Svdd, EllipticEnvelope };

const char* to_string(DetectorKind kind);

/// A trained one-class model. Scores are positive for anomalies.
struct OneClassModel {
  DetectorKind kind = DetectorKind::OcSvm;
  Eigen::Index dim = 0;

  // Kernel models (RBF, k(a, b) = exp(-gamma |a - b|^2)).
  double gamma = 0.0;
  double nu = 0.0;
  Eigen::MatrixXd support;  // one support vector per row
  Eigen::VectorXd alpha;    // dual coefficients of the support vectors
  double rho = 0.0;         // OC-SVM offset
  double center_norm = 0.0; // SVDD: alpha^T K alpha
  double radius2 = 0.0;     // SVDD: R^2

  // Elliptic envelope.
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd precision;
  double threshold = 0.0;  // tau^2
  double contamination = 0.0;

  // Solver diagnostics.
  long iterations = 0;
  double kkt_gap = 0.0;
};

struct SmoOptions {
  double tol = 1e-8;
  long max_iter = 2000000;
};

/// Solves min 1/2 a^T Q a + p^T a subject to sum a = 1, 0 <= a <= c by
/// maximal-violating-pair SMO (lowest index wins ties). Returns the final
/// gradient Q a + p in `grad`. Throws TrainingError on non-convergence.
Eigen::VectorXd smo_solve(const Eigen::MatrixXd& Q, const Eigen::VectorXd& p, double c,
                          const SmoOptions& options, Eigen::VectorXd* grad = nullptr,
                          long* iterations = nullptr, double* gap = nullptr);

/// 1 / (d * var(X)) over all entries.
double scale_gamma(const Eigen::MatrixXd& X);

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double gamma);

/// Schoelkopf one-class SVM. `gamma` empty selects scale_gamma(X).
OneClassModel train_ocsvm(const Eigen::MatrixXd& X, double nu, std::optional<double> gamma = {},
                          const SmoOptions& options = {});

/// Tax-Duin support vector data description with C = 1 / (nu N).
OneClassModel train_svdd(const Eigen::MatrixXd& X, double nu, double gamma,
                         const SmoOptions& options = {});

/// Gaussian envelope: sample mean, covariance + 1e-6 trace/d I, threshold at
/// the (1 - contamination) quantile of the training Mahalanobis distances.
OneClassModel train_ee(const Eigen::MatrixXd& X, double contamination);

double score(const OneClassModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
bool predict(const OneClassModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd score_rows(const OneClassModel& model, const Eigen::MatrixXd& X);

/// Plain-text block format (model-file number syntax).
std::string save_model(const OneClassModel& model);
OneClassModel load_model(const std::string& text);

struct DetectorConfig {
  double nu_ocsvm = 0.12;
  double nu_svdd = 0.12;
  std::optional<double> gamma_ocsvm;  // empty: scale rule
  std::optional<double> gamma_svdd = 0.1;  // empty: scale rule
  double contamination = 0.05;

  void validate() const;
};

}  // namespace etcpn
