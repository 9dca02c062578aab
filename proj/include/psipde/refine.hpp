#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psipde/core.hpp"
#include "psipde/pde_solver.hpp"

namespace psipde {

enum class IcSource { analytic, from_data };
const char* to_string(IcSource s);
IcSource parse_ic_source(const std::string& name);

struct RefineConfig {
  int max_iters = 40;
  // Largest relative coefficient change tried first in each line search.
  double initial_step = 0.2;
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 12;
  // Relative perturbation of each coefficient for central differences. With
  // dispersive terms and a data-derived initial condition the loss is ragged
  // below about 1e-3.
  double fd_step = 1e-2;
  // Stop once an accepted step lowers the loss by less than tol (relative).
  double tol = 1e-6;
  IcSource ic_source = IcSource::analytic;
  // Adjudication: losses within this relative gap count as tied.
  double tie_tolerance = 0.05;
  // Terms contributing less than this fraction of the largest are pruned.
  double prune_fraction = 0.02;
  int max_free = 6;
  // Substep budget per candidate solve; stiffer candidates count as unstable.
  std::size_t max_substeps = 400'000;

  void validate() const;
};

// Solver context shared by every candidate: stored grid, boundary handling
// and the initial condition.
struct SolveContext {
  Grid grid;
  SolverOptions solver;
  InitialCondition ic;
};

FieldTensor solve_candidate(const CandidateEquation& eq, const SolveContext& ctx);

// RMS of (solve - data) over all grid points; +infinity if the candidate
// blows up or exceeds the substep budget.
double loss(const CandidateEquation& eq, const FieldTensor& data, const SolveContext& ctx);

struct OptimizeResult {
  CandidateEquation equation;
  std::vector<double> loss_history;  // one entry per accepted iterate, starting at the initial loss
  int iterations = 0;
  int solves = 0;
  bool stalled = false;
  bool converged = false;
};

OptimizeResult optimize_coeffs(const CandidateEquation& eq, const FieldTensor& data, const SolveContext& ctx,
                               const RefineConfig& cfg);

struct ErrorSummary {
  double rms = 0.0;           // RMS(solve - data)
  double rms_relative = 0.0;  // rms / max|data|
  double max_relative = 0.0;  // max |solve - data| / max|data|
  double t_at_max = 0.0;
  double x_at_max = 0.0;
  double y_at_max = 0.0;
  // max |solve - data| / |data| over points with |data| >= kPointwiseFloor * max|data|
  double max_pointwise = 0.0;
  double t_at_pointwise = 0.0;
  double x_at_pointwise = 0.0;
  double y_at_pointwise = 0.0;
};

inline constexpr double kPointwiseFloor = 0.01;

ErrorSummary error_summary(const FieldTensor& solution, const FieldTensor& data);

struct CandidateResult {
  int id = 0;
  std::string source;  // e.g. "branch 0" or "pruned from 2"
  CandidateEquation initial;
  CandidateEquation optimized;
  std::vector<double> loss_history;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  ErrorSummary errors;
  std::vector<std::string> insignificant;
  bool unstable = false;
  bool stalled = false;
  int iterations = 0;
  std::string failure;
};

enum class Rationale { lowest_loss, parsimony_tiebreak };
const char* to_string(Rationale r);

struct RefineReport {
  std::vector<CandidateResult> candidates;
  int winner = -1;  // position in candidates
  Rationale rationale = Rationale::lowest_loss;
  std::string loss_target;  // which field the loss was measured against

  const CandidateResult& winning() const { return candidates.at(std::size_t(winner)); }
};

struct CandidateInput {
  CandidateEquation equation;
  std::string source;
};

// Refines every candidate, prunes insignificant terms and picks a winner.
// `column_norms` maps library index to the L2 norm of that term over the
// data; it weighs coefficients when judging significance.
RefineReport adjudicate(const std::vector<CandidateInput>& candidates, const FieldTensor& data,
                        const SolveContext& ctx, const std::map<int, double>& column_norms, const RefineConfig& cfg);

}  // namespace psipde
