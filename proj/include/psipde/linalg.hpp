#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "psipde/core.hpp"

namespace psipde {

// Real regression system target ~ theta * xi. Rows come in groups of
// `group_size` consecutive rows that must stay together when splitting
// (real and imaginary parts of one Fourier mode).
struct RegressionSystem {
  Eigen::MatrixXd theta;
  Eigen::VectorXd target;
  std::vector<TermSpec> terms;
  int group_size = 1;

  Eigen::Index rows() const { return theta.rows(); }
  Eigen::Index cols() const { return theta.cols(); }
  std::size_t groups() const { return static_cast<std::size_t>(theta.rows() / group_size); }
};

struct LeastSquares {
  Eigen::VectorXd coefficients;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

// Minimum-norm least squares through a rank-revealing complete orthogonal
// decomposition.
LeastSquares lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

// Copies the listed rows / columns.
Eigen::MatrixXd take(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols);
Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows);

double rms(const Eigen::VectorXd& v);

}  // namespace psipde
