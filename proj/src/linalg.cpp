#include "psipde/linalg.hpp"

#include <cmath>

namespace psipde {

LeastSquares lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  LeastSquares out;
  if (a.cols() == 0) {
    out.coefficients = Eigen::VectorXd(0);
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  out.coefficients = cod.solve(b);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < a.cols();
  return out;
}

Eigen::MatrixXd take(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const Eigen::Index c = cols[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = m(rows[static_cast<std::size_t>(i)], c);
  }
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = v(rows[static_cast<std::size_t>(i)]);
  return out;
}

double rms(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

}  // namespace psipde
