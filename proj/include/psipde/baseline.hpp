#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "psipde/linalg.hpp"

namespace psipde {

struct StridgeConfig {
  double lambda = 1e-5;
  double d_tol = 1.0;
  int max_iters = 10;  // threshold / re-solve sweeps per tolerance
  int tol_iters = 25;  // tolerance search steps
  double split = 0.8;
  // Negative: 0.001 * cond(theta), as in the reference implementation.
  double l0_penalty = -1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Sequential thresholded ridge at a fixed tolerance on an already
// normalized system. Returns coefficients of every column (zeros off the
// support).
Eigen::VectorXd stridge_fixed(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target, double lambda,
                              double tol, int max_iters);

struct StridgeResult {
  Eigen::VectorXd coefficients;  // original units, one per library column
  std::vector<int> support;      // library indices
  std::vector<TermSpec> terms;
  double best_tolerance = 0.0;
  double l0_penalty = 0.0;
  bool empty = false;
};

// Full baseline: columns scaled to unit L2 norm and the target to unit RMS,
// random train/test split, then the adaptive tolerance search that keeps
// the tolerance with the lowest test error plus l0 penalty.
StridgeResult stridge(const RegressionSystem& sys, const StridgeConfig& cfg);

}  // namespace psipde
