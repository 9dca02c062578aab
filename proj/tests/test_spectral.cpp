#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "psipde/featlib.hpp"
#include "psipde/rng.hpp"
#include "psipde/simulate.hpp"
#include "psipde/spectral.hpp"

using namespace psipde;

namespace {

Library smooth_library(bool two_d = false) {
  const Grid g = two_d ? Grid::make_2d({0, 1, 12}, {-1, 0.875, 16}, {-1, 0.875, 16})
                       : Grid::make_1d({0, 1, 24}, {-1, 1, 40});
  std::vector<double> v(g.size());
  std::size_t i = 0;
  for (std::size_t it = 0; it < g.nt(); ++it)
    for (std::size_t ix = 0; ix < g.nx(); ++ix)
      for (std::size_t iy = 0; iy < g.ny(); ++iy)
        v[i++] = std::sin(2 * g.x.at(ix) - g.t.at(it)) + 0.5 * std::cos(g.x.at(ix) + (g.y ? g.y->at(iy) : 0.0));
  const FieldTensor u(g, v);
  LibrarySpec spec;
  if (two_d) spec.max_deriv_order = 2;
  return two_d ? build_library_2d(u, differentiate(u, {}), spec) : build_library(u, differentiate(u, {}), spec);
}

// Relative perturbation of one transformed column over the modes kept at `cutoff`.
double kept_perturbation(const Library& clean, const Library& noisy, int col, double cutoff) {
  const auto a = to_freq(clean, cutoff), b = to_freq(noisy, cutoff);
  return (b.theta.col(col) - a.theta.col(col)).norm() / a.theta.col(col).norm();
}

}  // namespace

TEST(Spectral, ParsevalHoldsOverDeduplicatedModes) {
  for (bool two_d : {false, true}) {
    const auto lib = smooth_library(two_d);
    const auto modes = block_modes(lib.matrix.rows);
    CounterRng rng(9);
    Eigen::VectorXd col(Eigen::Index(lib.matrix.rows.size()));
    for (auto& v : col) v = rng.normal();
    const auto c = block_transform(col, modes);
    double s = 0;
    for (std::size_t k = 0; k < c.size(); ++k) s += modes.multiplicity[k] * std::norm(c[k]);
    EXPECT_NEAR(s / col.squaredNorm(), 1.0, 1e-9);
  }
}

TEST(Spectral, FullCutoffPreservesLeastSquares) {
  for (bool two_d : {false, true}) {
    const auto lib = smooth_library(two_d);
    // a well conditioned subset keeps the comparison about the transform
    const std::vector<Eigen::Index> cols = {0, 1, 4, 5, 8};
    const std::vector<Eigen::Index> all_rows = [&] {
      std::vector<Eigen::Index> r(std::size_t(lib.target.size()));
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = Eigen::Index(i);
      return r;
    }();
    const auto real = lstsq(take(lib.matrix.columns, all_rows, cols), lib.target).coefficients;
    const auto sys = realify(to_freq(lib, 1.0));
    std::vector<Eigen::Index> freq_rows(std::size_t(sys.rows()));
    for (std::size_t i = 0; i < freq_rows.size(); ++i) freq_rows[i] = Eigen::Index(i);
    const auto freq = lstsq(take(sys.theta, freq_rows, cols), sys.target).coefficients;
    EXPECT_LT((real - freq).norm() / real.norm(), 1e-8);
  }
}

TEST(Spectral, ConstantColumnLivesAtZeroMode) {
  const auto fs = to_freq(smooth_library(), 1.0);
  ASSERT_EQ(fs.terms[0].label(), "1");
  for (Eigen::Index k = 0; k < fs.theta.rows(); ++k) {
    const auto& w = fs.kept_modes[std::size_t(k)];
    if (w[0] == 0 && w[1] == 0 && w[2] == 0) {
      EXPECT_GT(std::abs(fs.theta(k, 0)), 1.0);
    } else {
      EXPECT_LT(std::abs(fs.theta(k, 0)), 1e-10);
    }
  }
}

TEST(Spectral, CutoffKeepsExactlyTheModesInsideTheBall) {
  const auto lib = smooth_library();
  const auto modes = block_modes(lib.matrix.rows);
  for (double cut : {1.0, 0.5, 0.2, 0.05}) {
    const auto fs = to_freq(lib, cut);
    std::size_t expected = 0;
    for (std::size_t k = 0; k < modes.radius.size(); ++k) {
      const auto& w = modes.wavenumbers[k];
      expected += modes.radius[k] <= cut || (w[0] == 0 && w[1] == 0 && w[2] == 0);
    }
    EXPECT_EQ(std::size_t(fs.theta.rows()), expected);
    EXPECT_EQ(fs.kept_modes.size(), expected);
  }
  EXPECT_THROW(to_freq(lib, 0.0), Error);
  EXPECT_THROW(to_freq(lib, 1.5), Error);
}

TEST(Spectral, RealifyDoublesRows) {
  const auto fs = to_freq(smooth_library(), 0.3);
  const auto sys = realify(fs);
  EXPECT_EQ(sys.rows(), 2 * fs.theta.rows());
  EXPECT_EQ(sys.cols(), fs.theta.cols());
  EXPECT_EQ(sys.group_size, 2);
}

TEST(Spectral, RealifiedSolveMatchesRealConstrainedComplexSolve) {
  const auto fs = to_freq(smooth_library(), 0.5);
  const std::vector<Eigen::Index> cols = {1, 4, 8};
  Eigen::MatrixXcd a(fs.theta.rows(), Eigen::Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) a.col(Eigen::Index(j)) = fs.theta.col(cols[j]);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(fs.multiplicity.data(), Eigen::Index(fs.multiplicity.size()));
  // weighted normal equations restricted to real xi: Re(A^H W A) xi = Re(A^H W b)
  const Eigen::MatrixXcd wa = w.asDiagonal() * a;
  const Eigen::MatrixXd lhs = (a.adjoint() * wa).real();
  const Eigen::VectorXd rhs = (wa.adjoint() * fs.target).real();
  const Eigen::VectorXd oracle = lhs.ldlt().solve(rhs);
  const auto sys = realify(fs);
  std::vector<Eigen::Index> rows(std::size_t(sys.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = Eigen::Index(i);
  const auto xi = lstsq(take(sys.theta, rows, cols), sys.target).coefficients;
  EXPECT_LT((xi - oracle).norm() / oracle.norm(), 1e-8);
}

TEST(Spectral, ZeroTargetGivesZeroSolution) {
  auto lib = smooth_library();
  lib.target.setZero();
  const auto sys = realify(to_freq(lib, 0.5));
  EXPECT_EQ(sys.target.norm(), 0.0);
  EXPECT_EQ(lstsq(sys.theta, sys.target).coefficients.norm(), 0.0);
}

TEST(Spectral, LowModesAreLessPerturbedByNoise) {
  const auto spec = SimSpec::defaults(SystemKind::burgers1d);
  const auto clean = simulate(spec);
  const auto noisy = add_noise(clean, {0.5, 3});
  const auto a = build_library(clean, differentiate(clean, {}));
  const auto b = build_library(noisy, differentiate(noisy, {}));
  const int uxx = 8;
  ASSERT_EQ(a.matrix.terms[uxx].label(), "u_xx");
  double prev = INFINITY;
  for (double cut : {1.0, 0.5, 0.2, 0.1}) {
    const double e = kept_perturbation(a, b, uxx, cut);
    EXPECT_LE(e, prev) << "cutoff " << cut;
    prev = e;
  }
  EXPECT_LT(kept_perturbation(a, b, uxx, 0.1), kept_perturbation(a, b, uxx, 1.0));
}

TEST(Spectral, NonRectangularBlockIsRejected) {
  auto lib = smooth_library();
  lib.matrix.rows.nt += 1;
  try {
    to_freq(lib, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::cannot_reshape);
  }
}
