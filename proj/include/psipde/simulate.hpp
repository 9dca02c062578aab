#pragma once

#include <cstdint>
#include <vector>

#include "psipde/core.hpp"
#include "psipde/pde_solver.hpp"

namespace psipde {

struct NoiseSpec {
  double level = 0.0;  // fraction of std(u), e.g. 0.10
  std::uint64_t seed = 0;
};

// Everything needed to re-solve a benchmark: its right-hand side, boundary
// treatment, analytic initial condition and solver resolution.
struct BenchmarkSetup {
  std::vector<WeightedTerm> rhs;
  SolverOptions solver;
  InitialCondition ic;
};

BenchmarkSetup benchmark_setup(const SimSpec& spec);
int default_refine_factor(SystemKind kind);

// u_t = -u u_x + nu u_xx, u(0,x) = -sin(pi x), u(t,+-1) = 0.
FieldTensor solve_burgers1d(const SimSpec& spec);
// u_t = lambda1 u u_x + lambda2 u_xxx, u(x,0) = cos(pi x), periodic.
FieldTensor solve_kdv(const SimSpec& spec);
// u_t = advection (u u_x + u u_y) + diffusion (u_xx + u_yy),
// u(x,y,0) = 0.1 sech(20x^2 + 25y^2), periodic.
FieldTensor solve_burgers2d(const SimSpec& spec);
FieldTensor simulate(const SimSpec& spec);

// f + level * std(f) * g with g i.i.d. standard normal from the counter-based
// generator keyed by `seed`.
FieldTensor add_noise(const FieldTensor& f, const NoiseSpec& noise);

}  // namespace psipde
