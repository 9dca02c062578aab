#pragma once

#include <functional>
#include <span>

#include "psipde/core.hpp"

namespace psipde {

enum class Boundary { dirichlet_zero, periodic };

struct SolverOptions {
  Boundary boundary = Boundary::dirichlet_zero;
  // Internal spatial nodes per stored spacing.
  int refine_factor = 1;
  // Fraction of the RK4 stability limit used for each substep.
  double safety = 0.8;
  std::size_t max_substeps = 4'000'000;
  double blowup_threshold = 1e6;
  int min_substeps_per_output = 2;
};

using InitialCondition = std::function<double(double x, double y)>;

// Method-of-lines solve of u_t = sum_k c_k * term_k on `grid`, output sampled
// at every stored node. Dirichlet problems (1D only) use 4th-order central
// differences with u = 0 at both ends and classical RK4. Periodic problems
// use Fourier derivatives with 2/3-rule dealiasing of the nonlinear part and
// an integrating-factor RK4 for the linear part.
//
// Throws Error(unstable_configuration) if the step limit would exceed
// max_substeps and Error(candidate_unstable) on blow-up.
FieldTensor solve_pde(std::span<const WeightedTerm> rhs, const InitialCondition& ic, const Grid& grid,
                      const SolverOptions& opts);

// Interpolates one stored time slice so it can seed a refined solve.
// Periodic slices use trigonometric interpolation, Dirichlet ones cubic
// Lagrange interpolation with zero end values.
InitialCondition interpolate_slice(const Grid& grid, std::span<const double> slice, Boundary boundary);

}  // namespace psipde
