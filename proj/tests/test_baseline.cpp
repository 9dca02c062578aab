#include <gtest/gtest.h>

#include "psipde/baseline.hpp"
#include "psipde/rng.hpp"

using namespace psipde;

namespace {

RegressionSystem sparse_system(double noise, std::uint64_t seed) {
  CounterRng rng(seed);
  RegressionSystem s;
  s.theta.resize(400, 8);
  for (auto& v : s.theta.reshaped()) v = rng.normal();
  s.target = 2.0 * s.theta.col(1) - 0.7 * s.theta.col(5);
  for (auto& v : s.target) v += noise * rng.normal();
  for (int j = 0; j < 8; ++j) {
    TermSpec t;
    t.poly_power = j;
    t.index = j + 1;
    s.terms.push_back(t);
  }
  return s;
}

}  // namespace

TEST(Stridge, NoRegularizationNoThresholdIsLeastSquares) {
  const auto s = sparse_system(0.3, 1);
  const auto w = stridge_fixed(s.theta, s.target, 0.0, 0.0, 10);
  const auto ls = lstsq(s.theta, s.target).coefficients;
  EXPECT_LT((w - ls).norm() / ls.norm(), 1e-9);
}

TEST(Stridge, HugeToleranceThresholdsEverything) {
  const auto s = sparse_system(0.3, 2);
  EXPECT_EQ(stridge_fixed(s.theta, s.target, 1e-5, 1e6, 10).norm(), 0.0);
}

TEST(Stridge, RecoversSparseSupport) {
  const auto s = sparse_system(0.01, 3);
  StridgeConfig cfg;
  cfg.seed = 4;
  const auto r = stridge(s, cfg);
  EXPECT_EQ(r.support, (std::vector<int>{2, 6}));
  EXPECT_FALSE(r.empty);
  EXPECT_NEAR(r.coefficients(1), 2.0, 1e-2);
  EXPECT_NEAR(r.coefficients(5), -0.7, 1e-2);
}

TEST(Stridge, SupportIgnoresTargetScale) {
  const auto s = sparse_system(0.2, 5);
  auto scaled = s;
  scaled.target *= 37.5;
  StridgeConfig cfg;
  cfg.seed = 6;
  const auto a = stridge(s, cfg), b = stridge(scaled, cfg);
  EXPECT_EQ(a.support, b.support);
  EXPECT_LT((b.coefficients - 37.5 * a.coefficients).norm(), 1e-9 * b.coefficients.norm());
}

TEST(Stridge, EmptyResultIsFlagged) {
  auto s = sparse_system(0.2, 7);
  StridgeConfig cfg;
  cfg.d_tol = 1e6;
  cfg.l0_penalty = 1e6;
  const auto r = stridge(s, cfg);
  EXPECT_TRUE(r.empty);
  EXPECT_TRUE(r.support.empty());
}

TEST(Stridge, Validation) {
  StridgeConfig c;
  c.lambda = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.d_tol = 0;
  EXPECT_THROW(c.validate(), Error);
  auto s = sparse_system(0.1, 8);
  s.target.setZero();
  EXPECT_THROW(stridge(s, {}), Error);
}
