#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "etcpn/net.hpp"

namespace etcpn::testing {

inline std::string data_path(const std::string& name) { return std::string(ETCPN_DATA_DIR) + "/" + name; }

inline Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d A;
  A << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  return A;
}

// Two rotation modes, input into x1, y = x2, sensor fault on y.
inline std::vector<ModeLti> benchmark_modes() {
  std::vector<ModeLti> modes(2);
  const double angles[] = {std::numbers::pi / 3, 2 * std::numbers::pi / 3};
  for (int q = 0; q < 2; ++q) {
    modes[q].A = rotation(angles[q]);
    modes[q].B = Eigen::Vector2d(1, 0);
    modes[q].C = Eigen::RowVector2d(0, 1);
    modes[q].Fx = Eigen::MatrixXd::Zero(2, 1);
    modes[q].Fy = Eigen::MatrixXd::Ones(1, 1);
  }
  return modes;
}

// 1 -> 2 when x1 > 0, 2 -> 1 when x1 <= 0.
inline std::vector<GuardPredicate> benchmark_guards() {
  return {{0, Comparator::Greater, 0.0, 0, 1}, {0, Comparator::LessEqual, 0.0, 1, 0}};
}

inline HybridModel benchmark_model(const Eigen::Vector2d& x0 = Eigen::Vector2d::Zero(), Index mode = 0) {
  return make_hybrid_model(benchmark_modes(), benchmark_guards(), mode, x0);
}

inline std::vector<Eigen::MatrixXd> printed_gains() {
  return {Eigen::Vector2d(0.866, 0.5), Eigen::Vector2d(0.866, -0.5)};
}

inline std::vector<Eigen::MatrixXd> exact_gains() {
  const double h = std::sqrt(3.0) / 2;
  return {Eigen::Vector2d(h, 0.5), Eigen::Vector2d(h, -0.5)};
}

// Roots of the characteristic polynomial of a 2x2 matrix.
inline std::vector<std::complex<double>> eigenvalues_2x2(const Eigen::Matrix2d& M) {
  const double tr = M.trace(), det = M.determinant();
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4 * det));
  return {(tr + disc) / 2.0, (tr - disc) / 2.0};
}

inline Eigen::MatrixXd random_spd(Index n, std::mt19937_64& rng, double floor = 0.1) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd M(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) M(i, j) = g(rng);
  return M * M.transpose() + floor * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = g(rng);
  return M;
}

}  // namespace etcpn::testing
