#include "psipde/simulate.hpp"

#include <cmath>
#include <numbers>

#include "psipde/rng.hpp"

namespace psipde {

int default_refine_factor(SystemKind kind) {
  switch (kind) {
    case SystemKind::burgers1d: return 4;
    case SystemKind::kdv: return 2;
    case SystemKind::burgers2d: return 1;
  }
  return 1;
}

// Lawson RK4 with a dispersive linear part loses accuracy well before the
// nominal explicit limit of the nonlinear terms.
constexpr double kPeriodicSafety = 0.25;

BenchmarkSetup benchmark_setup(const SimSpec& spec) {
  spec.validate();
  BenchmarkSetup b;
  b.solver.refine_factor = spec.refine_factor > 0 ? spec.refine_factor : default_refine_factor(spec.system);
  switch (spec.system) {
    case SystemKind::burgers1d:
      b.rhs = {{parse_term("u*u_x"), -1.0}, {parse_term("u_xx"), spec.coefficient("nu")}};
      b.solver.boundary = Boundary::dirichlet_zero;
      b.ic = [](double x, double) { return -std::sin(std::numbers::pi * x); };
      break;
    case SystemKind::kdv:
      b.rhs = {{parse_term("u*u_x"), spec.coefficient("lambda1")}, {parse_term("u_xxx"), spec.coefficient("lambda2")}};
      b.solver.boundary = Boundary::periodic;
      b.solver.safety = kPeriodicSafety;
      b.ic = [](double x, double) { return std::cos(std::numbers::pi * x); };
      break;
    case SystemKind::burgers2d:
      b.rhs = {{parse_term("u*(u_x+u_y)"), spec.coefficient("advection")},
               {parse_term("(u_xx+u_yy)"), spec.coefficient("diffusion")}};
      b.solver.boundary = Boundary::periodic;
      b.solver.safety = kPeriodicSafety;
      b.ic = [](double x, double y) { return 0.1 / std::cosh(20.0 * x * x + 25.0 * y * y); };
      break;
  }
  return b;
}

namespace {

FieldTensor run_benchmark(const SimSpec& spec, SystemKind expected) {
  if (spec.system != expected) throw Error(ErrorCode::invalid_argument, "simulation spec is for another system");
  const BenchmarkSetup b = benchmark_setup(spec);
  return solve_pde(b.rhs, b.ic, spec.grid, b.solver);
}

}  // namespace

FieldTensor solve_burgers1d(const SimSpec& spec) { return run_benchmark(spec, SystemKind::burgers1d); }
FieldTensor solve_kdv(const SimSpec& spec) { return run_benchmark(spec, SystemKind::kdv); }
FieldTensor solve_burgers2d(const SimSpec& spec) { return run_benchmark(spec, SystemKind::burgers2d); }

FieldTensor simulate(const SimSpec& spec) { return run_benchmark(spec, spec.system); }

FieldTensor add_noise(const FieldTensor& f, const NoiseSpec& noise) {
  if (!(noise.level >= 0.0) || noise.level > 1.0) {
    throw Error(ErrorCode::invalid_argument, "noise level must lie in [0, 1]");
  }
  std::vector<double> out(f.values().begin(), f.values().end());
  if (noise.level == 0.0) return FieldTensor(f.grid(), std::move(out));
  const double sigma = noise.level * field_stats(f).std;
  CounterRng rng(noise.seed);
  for (auto& v : out) v += sigma * rng.normal();
  return FieldTensor(f.grid(), std::move(out));
}

}  // namespace psipde
