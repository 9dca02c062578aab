#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "psipde/featlib.hpp"
#include "psipde/refine.hpp"
#include "psipde/simulate.hpp"

using namespace psipde;

namespace {

// 1D library index: derivative order outer, power inner.
WeightedTerm term(const std::string& label, double c) {
  TermSpec t = parse_term(label);
  t.index = 4 * t.deriv_x + t.poly_power + 1;
  return {t, c};
}

CandidateEquation eq(std::vector<WeightedTerm> terms) { return make_equation(std::move(terms), EquationOrigin::branch); }

// Small periodic viscous Burgers problem; each solve takes milliseconds.
SolveContext small_ctx() {
  SolveContext c;
  c.grid = Grid::make_1d({0, 0.5, 21}, {-1, 1 - 2.0 / 48, 48});
  c.solver.boundary = Boundary::periodic;
  c.ic = [](double x, double) { return std::sin(std::numbers::pi * x) + 0.2; };
  return c;
}

const CandidateEquation truth = eq({term("u*u_x", -1.0), term("u_xx", 0.05)});

std::map<int, double> norms_for(const FieldTensor& data) {
  const auto lib = build_library(data, differentiate(data, {}));
  std::map<int, double> m;
  for (std::size_t j = 0; j < lib.matrix.terms.size(); ++j) m[lib.matrix.terms[j].index] = lib.matrix.column_norms[j];
  return m;
}

RefineConfig quick_cfg() {
  RefineConfig c;
  c.max_iters = 30;
  return c;
}

}  // namespace

TEST(SolveCandidate, TrueBurgersReproducesSimulation) {
  const auto spec = SimSpec::defaults(SystemKind::burgers1d);
  const auto data = simulate(spec);
  const auto setup = benchmark_setup(spec);
  const SolveContext ctx{spec.grid, setup.solver, setup.ic};
  const auto u = solve_candidate(eq({term("u*u_x", -1.0), term("u_xx", spec.coefficient("nu"))}), ctx);
  double s = 0;
  for (double v : data.values()) s += v * v;
  EXPECT_LT(error_summary(u, data).rms / std::sqrt(s / double(data.size())), 0.01);
}

TEST(SolveCandidate, ZeroRightHandSideKeepsInitialCondition) {
  const auto ctx = small_ctx();
  const auto u = solve_candidate(eq({term("u_xx", 0.0)}), ctx);
  for (std::size_t it = 0; it < ctx.grid.nt(); ++it)
    for (std::size_t ix = 0; ix < ctx.grid.nx(); ++ix) EXPECT_NEAR(u(it, ix), ctx.ic(ctx.grid.x.at(ix), 0), 1e-12);
}

TEST(SolveCandidate, WrongBranchMissesNearOrigin) {
  const auto spec = SimSpec::defaults(SystemKind::burgers1d);
  const auto data = simulate(spec);
  const auto setup = benchmark_setup(spec);
  const SolveContext ctx{spec.grid, setup.solver, setup.ic};
  const auto u = solve_candidate(eq({term("u*u_x", -0.9886), term("u^2*u_xx", 0.0075)}), ctx);
  const auto e = error_summary(u, data);
  EXPECT_GT(e.max_pointwise, 0.5);
  EXPECT_LT(std::abs(e.x_at_pointwise), 0.2);
}

TEST(Loss, SelfDataIsZeroAndPerturbationIncreasesIt) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  EXPECT_LT(loss(truth, data, ctx), 1e-12);
  auto off = truth;
  off.terms[0].coefficient *= 1.1;
  EXPECT_GT(loss(off, data, ctx), 1e-4);
}

TEST(Loss, ZeroCoefficientTermsDoNotMatter) {
  const auto ctx = small_ctx();
  const auto data = add_noise(solve_candidate(truth, ctx), {0.05, 1});
  const auto padded = eq({term("u*u_x", -1.0), term("u_xx", 0.05), term("u^2*u_xx", 0.0)});
  EXPECT_DOUBLE_EQ(loss(truth, data, ctx), loss(padded, data, ctx));
}

TEST(Loss, UnstableCandidateIsInfinite) {
  auto ctx = small_ctx();
  ctx.solver.blowup_threshold = 1e3;
  const auto data = solve_candidate(truth, ctx);
  EXPECT_TRUE(std::isinf(loss(eq({term("u^3", 40.0)}), data, ctx)));
}

TEST(Optimize, StartingAtTruthBarelyMoves) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  const auto cfg = quick_cfg();
  const auto r = optimize_coeffs(truth, data, ctx, cfg);
  EXPECT_LE(r.iterations, 2);
  for (std::size_t k = 0; k < truth.terms.size(); ++k) {
    EXPECT_LE(std::abs(r.equation.terms[k].coefficient / truth.terms[k].coefficient - 1), cfg.fd_step);
  }
}

TEST(Optimize, RecoversPerturbedCoefficientsAndLossNeverRises) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  const auto start = eq({term("u*u_x", -0.85), term("u_xx", 0.065)});
  const auto r = optimize_coeffs(start, data, ctx, quick_cfg());
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) EXPECT_LE(r.loss_history[i], r.loss_history[i - 1]);
  EXPECT_LT(r.loss_history.back(), 0.05 * r.loss_history.front());
  EXPECT_NEAR(r.equation.terms[0].coefficient, -1.0, 0.02);
  EXPECT_NEAR(r.equation.terms[1].coefficient, 0.05, 0.005);
}

TEST(Optimize, FiniteDifferenceSlopeAgreesWithSecant) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  // near the optimum along each coordinate
  for (std::size_t k = 0; k < 2; ++k) {
    auto at = [&](double rel) {
      auto e = truth;
      e.terms[k].coefficient *= 1.0 + 0.05 + rel;
      return loss(e, data, ctx);
    };
    const double fd = at(1e-3) - at(-1e-3);
    const double secant = at(0.02) - at(0.0);
    EXPECT_GT(fd * secant, 0.0) << "coordinate " << k;
  }
}

TEST(Adjudicate, SingleCandidateWins) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  const auto rep = adjudicate({{truth, "branch 0"}}, data, ctx, norms_for(data), quick_cfg());
  EXPECT_EQ(rep.winner, 0);
  EXPECT_EQ(rep.rationale, Rationale::lowest_loss);
}

TEST(Adjudicate, SpuriousTermIsPrunedAndPrunedModelWins) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  const auto norms = norms_for(data);
  const auto padded = eq({term("u*u_x", -1.0), term("u_xx", 0.05), term("u^3", 1e-5)});
  const auto rep = adjudicate({{padded, "branch 0"}}, data, ctx, norms, quick_cfg());
  ASSERT_EQ(rep.candidates.size(), 2u);
  EXPECT_EQ(rep.candidates[0].insignificant, std::vector<std::string>{"u^3"});
  EXPECT_EQ(rep.winner, 1);
  EXPECT_EQ(rep.winning().optimized.support, (std::set<int>{6, 9}));
  EXPECT_LE(rep.winning().final_loss, rep.candidates[0].final_loss * (1 + quick_cfg().tie_tolerance));
}

TEST(Adjudicate, WrongStructureLoses) {
  const auto ctx = small_ctx();
  const auto data = solve_candidate(truth, ctx);
  const auto wrong = eq({term("u*u_x", -1.0), term("u^2*u_xx", 0.05)});
  const auto rep = adjudicate({{wrong, "branch 1"}, {truth, "branch 0"}}, data, ctx, norms_for(data), quick_cfg());
  EXPECT_EQ(rep.winning().initial.support, (std::set<int>{6, 9}));
}

TEST(Adjudicate, AllUnstableIsAnError) {
  auto ctx = small_ctx();
  ctx.solver.blowup_threshold = 1e3;
  const auto data = solve_candidate(truth, ctx);
  try {
    adjudicate({{eq({term("u^3", 40.0)}), "branch 0"}}, data, ctx, norms_for(data), quick_cfg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_viable_candidate);
  }
}

TEST(ErrorSummaryTest, PointwiseFloorAndLocation) {
  const Grid g = Grid::make_1d({0, 1, 8}, {0, 1, 8});
  std::vector<double> d(g.size(), 1.0), s(g.size(), 1.0);
  d[g.nx() * 3 + 2] = 2.0;   // peak
  s[g.nx() * 3 + 2] = 1.0;   // 50% miss at the peak
  d[g.nx() * 5 + 4] = 1e-4;  // below the floor, ignored
  s[g.nx() * 5 + 4] = 1.0;
  const auto e = error_summary(FieldTensor(g, s), FieldTensor(g, d));
  EXPECT_NEAR(e.max_pointwise, 0.5, 1e-15);
  EXPECT_NEAR(e.t_at_pointwise, g.t.at(3), 1e-15);
  EXPECT_NEAR(e.x_at_pointwise, g.x.at(2), 1e-15);
  EXPECT_NEAR(e.max_relative, 0.5, 1e-15);
}

TEST(RefineConfigTest, Validation) {
  RefineConfig c;
  c.shrink = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_backtracks = 0;
  EXPECT_THROW(c.validate(), Error);
}
