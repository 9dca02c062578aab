#include "psipde/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "psipde/field_io.hpp"
#include "psipde/parallel.hpp"
#include "psipde/rng.hpp"
#include "psipde/simulate.hpp"
#include "psipde/spectral.hpp"

namespace psipde {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::config: return "config";
    case Stage::simulate: return "simulate";
    case Stage::denoise: return "denoise";
    case Stage::featlib: return "featlib";
    case Stage::spectral: return "spectral";
    case Stage::select: return "select";
    case Stage::refine: return "refine";
    case Stage::report: return "report";
  }
  return "?";
}

int exit_code(Stage s) { return 2 + static_cast<int>(s); }

RunLog::RunLog(const std::filesystem::path& dir, bool verbose) : verbose_(verbose) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!ec) file_.open(dir / "run.log", std::ios::app);
}

void RunLog::operator()(const std::string& msg) {
  if (verbose_) std::cerr << msg << "\n";
  if (file_) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    file_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " " << msg << "\n";
    file_.flush();
  }
}

std::map<std::string, std::uint64_t> stream_seeds(std::uint64_t root) {
  std::map<std::string, std::uint64_t> s;
  for (const char* name : {"simulate.noise", "denoise.init", "select.splits", "stridge.split"}) {
    s[name] = derive_seed(root, name);
  }
  return s;
}

namespace {

bool periodic(SystemKind k) { return k != SystemKind::burgers1d; }

Axis resize(const Axis& a, std::size_t n, bool is_periodic) {
  if (n == 0 || n == a.n) return a;
  if (!is_periodic) return {a.min, a.max, n};
  const double period = (a.max - a.min) * double(a.n) / double(a.n - 1);
  return {a.min, a.min + period * double(n - 1) / double(n), n};
}

template <class F>
auto tagged(Stage stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::io_failure, e.what()));
  }
}

void note(RunLog* log, const std::string& msg) {
  if (log) (*log)(msg);
}

double residual_ratio(const FieldTensor& f, const FieldTensor& clean) {
  std::vector<double> d(f.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = f.values()[i] - clean.values()[i];
  const double s = field_stats(clean).std;
  return s > 0.0 ? field_stats(d).std / s : 0.0;
}

CandidateEquation branch_equation(const SelectionBranch& b) {
  std::vector<WeightedTerm> terms;
  for (std::size_t k = 0; k < b.support.size(); ++k) terms.push_back({b.terms[k], b.coefficients(Eigen::Index(k))});
  return make_equation(terms, b.id == 0 ? EquationOrigin::selection : EquationOrigin::branch);
}

std::filesystem::path out_dir(const PipelineState& st) { return st.config.out_dir; }

}  // namespace

SimSpec resolve_spec(const PipelineConfig& cfg) {
  SimSpec s = SimSpec::defaults(cfg.system);
  const bool p = periodic(cfg.system);
  s.grid.t = resize(s.grid.t, cfg.nt, false);
  s.grid.x = resize(s.grid.x, cfg.nx, p);
  if (s.grid.y) s.grid.y = resize(*s.grid.y, cfg.ny, p);
  s.refine_factor = cfg.solver_refine;
  s.validate();
  return s;
}

LibrarySpec resolve_library(const PipelineConfig& cfg) {
  LibrarySpec l = cfg.library;
  if (l.max_deriv_order == 0) l.max_deriv_order = cfg.system == SystemKind::burgers2d ? 2 : 3;
  return l;
}

void stage_simulate(PipelineState& st) {
  tagged(Stage::simulate, [&] {
    const auto& cfg = st.config;
    st.spec = resolve_spec(cfg);
    if (!cfg.input.empty()) {
      st.measured = read_field(cfg.input);
      if (st.measured->grid().spatial_dims() != (cfg.system == SystemKind::burgers2d ? 2 : 1)) {
        throw Error(ErrorCode::dimension_mismatch, "input field does not match the configured system");
      }
      st.spec.grid = st.measured->grid();
      return;
    }
    st.clean = simulate(st.spec);
    st.measured = add_noise(*st.clean, {cfg.noise, st.report.seeds.at("simulate.noise")});
    std::filesystem::create_directories(out_dir(st));
    write_field(*st.clean, out_dir(st) / "clean.psig");
    write_field(*st.measured, out_dir(st) / "measured.psig");
  });
}

void stage_denoise(PipelineState& st) {
  tagged(Stage::denoise, [&] {
    TrainConfig tc = st.config.denoise;
    tc.seed = st.report.seeds.at("denoise.init");
    st.model = fit_surrogate(*st.measured, tc);
    st.denoised = resample(*st.model, st.measured->grid());
    auto& d = st.report.denoise;
    d.ran = true;
    d.epochs = int(st.model->history.val_loss.size());
    d.best_epoch = st.model->history.best_epoch;
    d.best_val_loss = st.model->history.best_val_loss;
    if (st.clean) {
      d.noisy_residual = residual_ratio(*st.measured, *st.clean);
      d.denoised_residual = residual_ratio(*st.denoised, *st.clean);
    }
    std::filesystem::create_directories(out_dir(st));
    save_model(*st.model, out_dir(st) / "model.psin");
    write_field(*st.denoised, out_dir(st) / "denoised.psig");
  });
}

void stage_library(PipelineState& st) {
  const auto& cfg = st.config;
  tagged(Stage::featlib, [&] {
    const FieldTensor& u = st.working_field();
    const DerivativeStack d = differentiate(u, cfg.diff);
    const LibrarySpec spec = resolve_library(cfg);
    st.library = u.grid().spatial_dims() == 2 ? build_library_2d(u, d, spec) : build_library(u, d, spec);
  });
  tagged(Stage::spectral, [&] {
    st.system = cfg.fft_enabled ? realify(to_freq(*st.library, cfg.cutoff_fraction)) : st.library->system();
  });
  st.report.library_size = int(st.library->matrix.terms.size());
  st.report.library_rows = std::size_t(st.library->matrix.columns.rows());
  st.report.regression_rows = std::size_t(st.system->rows());
  st.report.fft = cfg.fft_enabled;
  st.report.cutoff_fraction = cfg.fft_enabled ? cfg.cutoff_fraction : 1.0;
}

void stage_select(PipelineState& st) {
  tagged(Stage::select, [&] {
    SelectionConfig sc = st.config.select;
    sc.seed = st.report.seeds.at("select.splits");
    st.report.trace = psi_select(*st.system, sc);
    st.report.equation = branch_equation(st.report.trace.branches.front());
    std::filesystem::create_directories(out_dir(st));
    write_text(out_dir(st) / "trace.json", dump_json(to_json(st.report.trace)));
  });
}

void stage_refine(PipelineState& st) {
  tagged(Stage::refine, [&] {
    const auto& cfg = st.config;
    const BenchmarkSetup bench = benchmark_setup(st.spec);
    SolveContext ctx{st.measured->grid(), bench.solver, bench.ic};

    std::string ic = cfg.ic_source;
    if (ic == "auto") ic = (st.clean && cfg.noise == 0.0) ? "analytic" : "from_data";
    if (ic == "analytic" && !st.clean) {
      throw Error(ErrorCode::invalid_argument, "analytic initial condition needs a simulated benchmark");
    }
    if (ic == "from_data") {
      ctx.ic = interpolate_slice(ctx.grid, st.working_field().slice(0), bench.solver.boundary);
    }
    st.report.ic_source = ic;

    std::string target = cfg.loss_target;
    if (target == "auto") target = (st.denoised && cfg.noise >= 0.2) ? "denoised" : "raw";
    if (target == "denoised" && !st.denoised) throw Error(ErrorCode::invalid_argument, "no denoised field to compare against");
    const FieldTensor& data = target == "denoised" ? *st.denoised : *st.measured;

    std::vector<CandidateInput> cands;
    std::set<std::set<int>> seen;
    for (const auto& b : st.report.trace.branches) {
      CandidateEquation eq = branch_equation(b);
      if (!seen.insert(eq.support).second) continue;
      cands.push_back({eq, "branch " + std::to_string(b.id)});
    }
    std::map<int, double> norms;
    const auto& m = st.library->matrix;
    for (std::size_t j = 0; j < m.terms.size(); ++j) norms[m.terms[j].index] = m.column_norms[j];

    RefineReport rep = adjudicate(cands, data, ctx, norms, cfg.refine);
    rep.loss_target = target;
    st.report.equation = rep.winning().optimized;
    st.learned = solve_candidate(st.report.equation, ctx);
    st.report.refine = std::move(rep);
  });
}

void stage_report(PipelineState& st) {
  tagged(Stage::report, [&] {
    auto& r = st.report;
    if (st.clean) {
      r.truth = benchmark_setup(st.spec).rhs;
      r.coefficient_errors = coefficient_errors(r.equation, r.truth);
      std::set<std::string> want, got;
      for (const auto& wt : r.truth) want.insert(wt.term.label());
      for (const auto& wt : r.equation.terms) got.insert(wt.term.label());
      r.support_matches = want == got;
    }
    if (!st.learned) {
      // without refinement, show the selected equation's own solution if it has one
      const BenchmarkSetup bench = benchmark_setup(st.spec);
      SolveContext ctx{st.measured->grid(), bench.solver, bench.ic};
      if (!st.clean) ctx.ic = interpolate_slice(ctx.grid, st.working_field().slice(0), bench.solver.boundary);
      try {
        st.learned = solve_candidate(r.equation, ctx);
      } catch (const Error&) {
      }
    }
    emit_report(r, st.config.formats, out_dir(st), &*st.measured, st.learned ? &*st.learned : nullptr);
  });
}

PipelineState initial_state(const PipelineConfig& cfg) {
  tagged(Stage::config, [&] {
    cfg.validate();
    return 0;
  });
  PipelineState st;
  st.config = cfg;
  st.report.system = to_string(cfg.system);
  st.report.noise = cfg.noise;
  st.report.input = cfg.input;
  st.report.seed = cfg.seed;
  st.report.seeds = stream_seeds(cfg.seed);
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  return st;
}

void prepare_system(PipelineState& st, RunLog* log) {
  using clock = std::chrono::steady_clock;
  auto timed = [&](const char* name, auto&& f) {
    const auto t0 = clock::now();
    note(log, std::string("stage ") + name + " started");
    f();
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::ostringstream s;
    s << "stage " << name << " done in " << std::fixed << std::setprecision(1) << secs << " s";
    note(log, s.str());
  };
  timed("simulate", [&] { stage_simulate(st); });
  st.report.grid = st.measured->grid();
  if (st.config.denoise_enabled) {
    timed("denoise", [&] { stage_denoise(st); });
    if (st.report.denoise.denoised_residual) {
      std::ostringstream s;
      s << "denoise residual " << *st.report.denoise.noisy_residual << " -> " << *st.report.denoise.denoised_residual;
      note(log, s.str());
    }
  }
  timed("library", [&] { stage_library(st); });
  note(log, "regression system " + std::to_string(st.system->rows()) + " x " + std::to_string(st.system->cols()));
}

void resume_from_artifacts(PipelineState& st, const std::filesystem::path& trace, const std::filesystem::path& data) {
  tagged(Stage::simulate, [&] {
    const std::filesystem::path dir = out_dir(st);
    st.spec = resolve_spec(st.config);
    if (!data.empty()) {
      st.measured = read_field(data);
      if (std::filesystem::exists(dir / "clean.psig")) st.clean = read_field(dir / "clean.psig");
    } else if (!st.config.input.empty()) {
      st.measured = read_field(st.config.input);
    } else {
      st.measured = read_field(dir / "measured.psig");
      st.clean = read_field(dir / "clean.psig");
    }
    st.spec.grid = st.measured->grid();
    st.report.grid = st.spec.grid;
    if (std::filesystem::exists(dir / "denoised.psig")) st.denoised = read_field(dir / "denoised.psig");
  });
  tagged(Stage::select, [&] {
    const std::filesystem::path path = trace.empty() ? out_dir(st) / "trace.json" : trace;
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_failure, "cannot read '" + path.string() + "'; run discover first");
    nlohmann::json j;
    try {
      in >> j;
      st.report.trace = selection_trace_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::io_failure, std::string("malformed trace.json: ") + e.what());
    }
    st.report.equation = branch_equation(st.report.trace.branches.at(0));
  });
  stage_library(st);
}

PipelineState run_pipeline(const PipelineConfig& cfg, RunLog* log) {
  PipelineState st = initial_state(cfg);
  prepare_system(st, log);
  stage_select(st);
  for (const auto& b : st.report.trace.branches) {
    note(log, "branch " + std::to_string(b.id) + " (" + b.stop_reason + "): " + branch_equation(b).to_string(6));
  }
  if (cfg.refine_enabled) {
    note(log, "stage refine started");
    stage_refine(st);
    for (const auto& c : st.report.refine->candidates) {
      note(log, "candidate " + std::to_string(c.id) + " [" + c.source + "] " + c.optimized.to_string(6) +
                    " loss " + std::to_string(c.final_loss));
    }
  }
  note(log, "result: " + st.report.equation.to_string(6));
  stage_report(st);
  return st;
}

StridgeResult run_stridge(PipelineState& st) {
  if (!st.system) {
    PipelineState fresh = initial_state(st.config);
    prepare_system(fresh, nullptr);
    st = std::move(fresh);
  }
  return tagged(Stage::select, [&] {
    StridgeConfig sc = st.config.stridge;
    sc.seed = st.report.seeds.at("stridge.split");
    return stridge(*st.system, sc);
  });
}

}  // namespace psipde
