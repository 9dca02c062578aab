#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <vector>

#include "psipde/featlib.hpp"
#include "psipde/linalg.hpp"

namespace psipde {

// Half-space Fourier modes of a (t, x[, y]) block with Hermitian duplicates
// removed. `multiplicity` is 2 for modes standing in for a conjugate pair and
// 1 for self-conjugate ones.
struct ModeSet {
  std::array<std::size_t, 3> dims{};  // (n_t, n_x, n_y); n_y = 1 for 1D
  std::vector<std::array<long, 3>> wavenumbers;
  std::vector<double> radius;  // normalized, 1 at the corner of the box
  std::vector<double> multiplicity;
  std::vector<std::size_t> offset;  // position in the r2c output array
};

ModeSet block_modes(const RowBlock& block);

// Unitary DFT of one block-shaped column, returned on the modes of `modes`.
std::vector<std::complex<double>> block_transform(const Eigen::VectorXd& column, const ModeSet& modes);

struct FreqSystem {
  Eigen::MatrixXcd theta;
  Eigen::VectorXcd target;
  std::vector<std::array<long, 3>> kept_modes;
  std::vector<double> multiplicity;
  std::vector<TermSpec> terms;
  double cutoff_fraction = 1.0;
};

// Transforms every library column and the target, then keeps the modes with
// normalized radius <= cutoff_fraction (the zero mode is always kept).
FreqSystem to_freq(const Library& lib, double cutoff_fraction);

// Stacks sqrt(multiplicity) * (Re, Im) of each kept mode as two real rows.
RegressionSystem realify(const FreqSystem& fs);

}  // namespace psipde
