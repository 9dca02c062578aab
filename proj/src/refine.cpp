#include "psipde/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "psipde/parallel.hpp"

namespace psipde {

const char* to_string(IcSource s) { return s == IcSource::analytic ? "analytic" : "from_data"; }

IcSource parse_ic_source(const std::string& name) {
  if (name == "analytic") return IcSource::analytic;
  if (name == "from_data") return IcSource::from_data;
  throw Error(ErrorCode::invalid_argument, "unknown ic_source '" + name + "'");
}

const char* to_string(Rationale r) { return r == Rationale::lowest_loss ? "lowest_loss" : "parsimony_tiebreak"; }

void RefineConfig::validate() const {
  if (max_iters < 0) throw Error(ErrorCode::invalid_argument, "max_iters must be >= 0");
  if (!(initial_step > 0.0)) throw Error(ErrorCode::invalid_argument, "initial_step must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw Error(ErrorCode::invalid_argument, "shrink must lie in (0, 1)");
  if (!(armijo > 0.0 && armijo < 1.0)) throw Error(ErrorCode::invalid_argument, "armijo must lie in (0, 1)");
  if (max_backtracks < 1) throw Error(ErrorCode::invalid_argument, "max_backtracks must be >= 1");
  if (!(fd_step > 0.0)) throw Error(ErrorCode::invalid_argument, "fd_step must be positive");
  if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tol must be positive");
  if (!(tie_tolerance >= 0.0)) throw Error(ErrorCode::invalid_argument, "tie_tolerance must be >= 0");
  if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "prune_fraction must lie in [0, 1)");
  }
  if (max_free < 1) throw Error(ErrorCode::invalid_argument, "max_free must be >= 1");
  if (max_substeps < 1) throw Error(ErrorCode::invalid_argument, "max_substeps must be >= 1");
}

FieldTensor solve_candidate(const CandidateEquation& eq, const SolveContext& ctx) {
  eq.validate();
  return solve_pde(eq.terms, ctx.ic, ctx.grid, ctx.solver);
}

namespace {

double rms_diff(const FieldTensor& a, const FieldTensor& b) {
  if (!(a.grid() == b.grid())) throw Error(ErrorCode::dimension_mismatch, "solution and data grids differ");
  double s = 0.0;
  const auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) s += (va[i] - vb[i]) * (va[i] - vb[i]);
  return std::sqrt(s / double(va.size()));
}

bool solver_gave_up(const Error& e) {
  return e.code() == ErrorCode::candidate_unstable || e.code() == ErrorCode::unstable_configuration;
}

SolveContext with_budget(SolveContext ctx, const RefineConfig& cfg) {
  ctx.solver.max_substeps = cfg.max_substeps;
  return ctx;
}

}  // namespace

double loss(const CandidateEquation& eq, const FieldTensor& data, const SolveContext& ctx) {
  try {
    return rms_diff(solve_candidate(eq, ctx), data);
  } catch (const Error& e) {
    if (solver_gave_up(e)) return std::numeric_limits<double>::infinity();
    throw;
  }
}

OptimizeResult optimize_coeffs(const CandidateEquation& eq, const FieldTensor& data, const SolveContext& ctx_in,
                               const RefineConfig& cfg) {
  cfg.validate();
  eq.validate();
  const std::size_t k = eq.terms.size();
  if (int(k) > cfg.max_free) {
    throw Error(ErrorCode::invalid_argument, "candidate has more free coefficients than max_free");
  }
  const SolveContext ctx = with_budget(ctx_in, cfg);
  // relative coordinates: xi_j = xi0_j + scale_j * theta_j
  std::vector<double> xi0(k), scale(k);
  for (std::size_t j = 0; j < k; ++j) {
    xi0[j] = eq.terms[j].coefficient;
    scale[j] = xi0[j] != 0.0 ? std::abs(xi0[j]) : 1.0;
  }
  OptimizeResult res;
  auto at = [&](const std::vector<double>& theta) {
    CandidateEquation e = eq;
    for (std::size_t j = 0; j < k; ++j) e.terms[j].coefficient = xi0[j] + scale[j] * theta[j];
    return e;
  };
  auto eval = [&](const std::vector<double>& theta) {
    ++res.solves;
    return loss(at(theta), data, ctx);
  };

  std::vector<double> theta(k, 0.0);
  double current = eval(theta);
  res.loss_history.push_back(current);
  if (!std::isfinite(current)) {
    res.equation = eq;
    res.stalled = true;
    return res;
  }
  double step = cfg.initial_step;
  std::vector<double> prev_theta, prev_g;
  for (int iter = 0; iter < cfg.max_iters && current > 0.0; ++iter) {
    std::vector<double> g(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> up = theta, down = theta;
      up[j] += cfg.fd_step;
      down[j] -= cfg.fd_step;
      const double lu = eval(up), ld = eval(down);
      if (std::isfinite(lu) && std::isfinite(ld)) {
        g[j] = (lu - ld) / (2.0 * cfg.fd_step);
      } else if (std::isfinite(lu)) {
        g[j] = (lu - current) / cfg.fd_step;
      } else if (std::isfinite(ld)) {
        g[j] = (current - ld) / cfg.fd_step;
      }
    }
    double gmax = 0.0, g2 = 0.0;
    for (double v : g) {
      gmax = std::max(gmax, std::abs(v));
      g2 += v * v;
    }
    if (gmax == 0.0) {
      res.converged = true;
      break;
    }
    // Barzilai-Borwein guess for the first trial step; the search direction
    // stays the negative gradient.
    if (!prev_g.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double sj = theta[j] - prev_theta[j], yj = g[j] - prev_g[j];
        ss += sj * sj;
        sy += sj * yj;
      }
      if (sy > 0.0) step = std::clamp(ss / sy * gmax, 1e-3 * cfg.initial_step, 4.0 * cfg.initial_step);
    }
    prev_theta = theta;
    prev_g = g;
    // direction scaled so that alpha is the largest relative change
    bool accepted = false;
    double trial_loss = current;
    std::vector<double> trial(k);
    double alpha = step;
    for (int b = 0; b < cfg.max_backtracks; ++b, alpha *= cfg.shrink) {
      for (std::size_t j = 0; j < k; ++j) trial[j] = theta[j] - alpha * g[j] / gmax;
      trial_loss = eval(trial);
      if (std::isfinite(trial_loss) && trial_loss <= current - cfg.armijo * alpha * g2 / gmax) {
        accepted = true;
        break;
      }
    }
    ++res.iterations;
    if (!accepted) {
      res.stalled = true;
      break;
    }
    const double gain = (current - trial_loss) / current;
    theta = trial;
    current = trial_loss;
    res.loss_history.push_back(current);
    step = std::min(2.0 * alpha, 4.0 * cfg.initial_step);
    if (gain < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.equation = at(theta);
  res.equation.fit_rms = current;
  res.equation.origin = EquationOrigin::refined;
  return res;
}

ErrorSummary error_summary(const FieldTensor& solution, const FieldTensor& data) {
  const Grid& g = data.grid();
  if (!(solution.grid() == g)) throw Error(ErrorCode::dimension_mismatch, "solution and data grids differ");
  const auto s = solution.values(), d = data.values();
  double peak = 0.0;
  for (double v : d) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) peak = 1.0;
  ErrorSummary e;
  double sum = 0.0, worst = -1.0, worst_pt = -1.0;
  std::size_t at = 0, at_pt = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double diff = std::abs(s[i] - d[i]);
    sum += diff * diff;
    if (diff > worst) {
      worst = diff;
      at = i;
    }
    if (std::abs(d[i]) >= kPointwiseFloor * peak && diff / std::abs(d[i]) > worst_pt) {
      worst_pt = diff / std::abs(d[i]);
      at_pt = i;
    }
  }
  e.rms = std::sqrt(sum / double(d.size()));
  e.rms_relative = e.rms / peak;
  e.max_relative = worst / peak;
  e.max_pointwise = std::max(worst_pt, 0.0);
  const std::size_t ny = g.ny(), nx = g.nx();
  e.t_at_max = g.t.at(at / (nx * ny));
  e.x_at_max = g.x.at((at / ny) % nx);
  e.y_at_max = g.y ? g.y->at(at % ny) : 0.0;
  e.t_at_pointwise = g.t.at(at_pt / (nx * ny));
  e.x_at_pointwise = g.x.at((at_pt / ny) % nx);
  e.y_at_pointwise = g.y ? g.y->at(at_pt % ny) : 0.0;
  return e;
}

namespace {

CandidateResult refine_one(const CandidateInput& in, int id, const FieldTensor& data, const SolveContext& ctx,
                           const std::map<int, double>& norms, const RefineConfig& cfg) {
  CandidateResult r;
  r.id = id;
  r.source = in.source;
  r.initial = in.equation;
  r.optimized = in.equation;
  if (int(in.equation.terms.size()) > cfg.max_free) {
    r.failure = "too many free coefficients";
    r.unstable = true;
    r.initial_loss = r.final_loss = std::numeric_limits<double>::infinity();
    return r;
  }
  const OptimizeResult opt = optimize_coeffs(in.equation, data, ctx, cfg);
  r.loss_history = opt.loss_history;
  r.initial_loss = opt.loss_history.front();
  r.final_loss = opt.loss_history.back();
  r.iterations = opt.iterations;
  r.stalled = opt.stalled;
  r.optimized = opt.equation;
  r.optimized.fit_rms = r.final_loss;
  if (!std::isfinite(r.final_loss)) {
    r.unstable = true;
    r.failure = "candidate unstable";
    return r;
  }
  try {
    r.errors = error_summary(solve_candidate(r.optimized, with_budget(ctx, cfg)), data);
  } catch (const Error& e) {
    if (!solver_gave_up(e)) throw;
    r.unstable = true;
    r.failure = e.what();
    return r;
  }
  double largest = 0.0;
  std::vector<double> contrib;
  for (const auto& wt : r.optimized.terms) {
    const auto it = norms.find(wt.term.index);
    if (it == norms.end()) {
      throw Error(ErrorCode::invalid_argument, "no column norm for term '" + wt.term.label() + "'");
    }
    contrib.push_back(std::abs(wt.coefficient) * it->second);
    largest = std::max(largest, contrib.back());
  }
  for (std::size_t j = 0; j < contrib.size(); ++j) {
    if (contrib[j] < cfg.prune_fraction * largest) r.insignificant.push_back(r.optimized.terms[j].term.label());
  }
  return r;
}

}  // namespace

RefineReport adjudicate(const std::vector<CandidateInput>& candidates, const FieldTensor& data,
                        const SolveContext& ctx, const std::map<int, double>& column_norms, const RefineConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw Error(ErrorCode::invalid_argument, "adjudicate needs at least one candidate");
  RefineReport rep;
  rep.candidates.resize(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    rep.candidates[i] = refine_one(candidates[i], int(i), data, ctx, column_norms, cfg);
  });

  std::set<std::set<int>> seen;
  for (const auto& c : rep.candidates) seen.insert(c.initial.support);
  std::vector<CandidateInput> pruned;
  for (const auto& c : rep.candidates) {
    if (c.unstable || c.insignificant.empty()) continue;
    std::vector<WeightedTerm> keep;
    for (const auto& wt : c.optimized.terms) {
      if (std::find(c.insignificant.begin(), c.insignificant.end(), wt.term.label()) == c.insignificant.end()) {
        keep.push_back(wt);
      }
    }
    if (keep.empty()) continue;
    CandidateEquation eq = make_equation(keep, EquationOrigin::refined);
    if (!seen.insert(eq.support).second) continue;
    pruned.push_back({eq, "pruned from " + std::to_string(c.id)});
  }
  const std::size_t base = rep.candidates.size();
  rep.candidates.resize(base + pruned.size());
  parallel_for(pruned.size(), [&](std::size_t i) {
    rep.candidates[base + i] = refine_one(pruned[i], int(base + i), data, ctx, column_norms, cfg);
  });

  int best = -1;
  for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
    const auto& c = rep.candidates[i];
    if (c.unstable) continue;
    if (best < 0 || c.final_loss < rep.candidates[std::size_t(best)].final_loss) best = int(i);
  }
  if (best < 0) throw Error(ErrorCode::no_viable_candidate, "no viable candidate");
  const double limit = rep.candidates[std::size_t(best)].final_loss * (1.0 + cfg.tie_tolerance);
  int winner = best;
  for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
    const auto& c = rep.candidates[i];
    if (c.unstable || c.final_loss > limit) continue;
    const auto& w = rep.candidates[std::size_t(winner)];
    if (c.optimized.terms.size() < w.optimized.terms.size() ||
        (c.optimized.terms.size() == w.optimized.terms.size() && c.final_loss < w.final_loss)) {
      winner = int(i);
    }
  }
  rep.winner = winner;
  rep.rationale = winner == best ? Rationale::lowest_loss : Rationale::parsimony_tiebreak;
  return rep;
}

}  // namespace psipde
