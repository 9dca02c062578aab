// psi_pde command line: simulate, denoise, discover, refine, run,
// compare-stridge and config.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "psipde/field_io.hpp"
#include "psipde/parallel.hpp"
#include "psipde/pipeline.hpp"

using namespace psipde;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = -1;
  bool verbose = false;
  std::string system;
  std::vector<double> noise;
  std::string input;
};

PipelineConfig load(const GlobalOptions& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig::defaults() : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.threads >= 0) cfg.threads = g.threads;
  if (!g.system.empty()) {
    try {
      cfg.system = parse_system(g.system);
    } catch (const Error& e) {
      throw Error(ErrorCode::config_error, e.what());
    }
  }
  if (!g.noise.empty()) cfg.noise = g.noise.front();
  if (!g.input.empty()) cfg.input = g.input;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, e.what());
  }
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  return cfg;
}

std::string noise_dir(double noise) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "noise_%02d", int(std::lround(noise * 100.0)));
  return buf;
}

void print_report(const RunReport& r) {
  std::cout << "system " << r.system << ", noise " << r.noise * 100.0 << "%\n";
  if (r.denoise.denoised_residual) {
    std::cout << "denoise residual " << *r.denoise.noisy_residual << " -> " << *r.denoise.denoised_residual << "\n";
  }
  for (const auto& b : r.trace.branches) {
    std::cout << "branch " << b.id << " [" << b.stop_reason << "] support {";
    for (std::size_t k = 0; k < b.support.size(); ++k) std::cout << (k ? "," : "") << b.support[k];
    std::cout << "}\n";
  }
  if (r.refine) {
    for (std::size_t i = 0; i < r.refine->candidates.size(); ++i) {
      const auto& c = r.refine->candidates[i];
      std::cout << (int(i) == r.refine->winner ? "* " : "  ") << c.source << ": " << c.optimized.to_string(6)
                << "  loss " << c.final_loss << (c.unstable ? " (unstable)" : "") << "\n";
    }
    std::cout << "rationale " << to_string(r.refine->rationale) << ", loss against " << r.refine->loss_target
              << " data, ic " << r.ic_source << "\n";
  }
  std::cout << "result: " << r.equation.to_string(6) << "\n";
  if (r.support_matches) std::cout << "support matches truth: " << (*r.support_matches ? "yes" : "no") << "\n";
}

// [stridge] lambda = [...] and d_tol = [...] of equal length.
std::vector<std::string> read_param_grid(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const TomlDocument doc = parse_toml(ss.str());
  auto numbers = [&](const char* key) {
    std::vector<double> out;
    const auto it = doc.find(key);
    if (it == doc.end()) throw Error(ErrorCode::config_error, std::string("missing '") + key + "'");
    const auto* arr = std::get_if<TomlArray>(&it->second.v);
    if (!arr) throw Error(ErrorCode::config_error, std::string("'") + key + "' must be an array");
    for (const auto& v : *arr) {
      if (const auto* d = std::get_if<double>(&v.v)) out.push_back(*d);
      else if (const auto* i = std::get_if<std::int64_t>(&v.v)) out.push_back(double(*i));
      else throw Error(ErrorCode::config_error, std::string("'") + key + "' must hold numbers");
    }
    return out;
  };
  const auto lambda = numbers("stridge.lambda"), d_tol = numbers("stridge.d_tol");
  if (lambda.size() != d_tol.size()) throw Error(ErrorCode::config_error, "lambda and d_tol differ in length");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    std::ostringstream s;
    s.precision(17);
    s << lambda[i] << "," << d_tol[i];
    out.push_back(s.str());
  }
  return out;
}

int fail(const char* what, int code, const std::string& msg) {
  std::cerr << "psi_pde: " << what << " error: " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PDE discovery from noisy field data"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "root seed");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--threads", g.threads, "worker threads (0: PSI_PDE_THREADS or all cores)");
  app.add_flag("--verbose,-v", g.verbose, "progress on stderr");
  app.add_option("--system", g.system, "burgers1d | kdv | burgers2d");
  app.add_option("--noise", g.noise, "noise level(s) as a fraction of std(u); run accepts several");
  app.add_option("--in", g.input, "measured field (.psig) instead of a simulation")->check(CLI::ExistingFile);

  auto* cmd_config = app.add_subcommand("config", "print or check configuration");
  bool print_defaults = false;
  cmd_config->add_flag("--print-defaults", print_defaults, "print every key with its default");
  auto* cmd_sim = app.add_subcommand("simulate", "simulate a benchmark and add noise");
  bool sim_csv = false;
  cmd_sim->add_flag("--csv", sim_csv, "also write measured.csv");
  std::string sim_out, dn_out, trace_out, trace_in, data_in, report_out, params_in, table_out;
  cmd_sim->add_option("--out", sim_out, "copy of the measured field");
  auto* cmd_denoise = app.add_subcommand("denoise", "fit the surrogate network and resample");
  cmd_denoise->add_option("--out", dn_out, "copy of the denoised field");
  auto* cmd_discover = app.add_subcommand("discover", "library construction and sparse selection");
  cmd_discover->add_option("--trace", trace_out, "copy of the selection trace");
  auto* cmd_refine = app.add_subcommand("refine", "refine the candidates of a previous discover run");
  cmd_refine->add_option("--trace", trace_in, "selection trace (default: OUT_DIR/trace.json)")->check(CLI::ExistingFile);
  cmd_refine->add_option("--data", data_in, "measured field (default: OUT_DIR/measured.psig)")->check(CLI::ExistingFile);
  cmd_refine->add_option("--report", report_out, "copy of report.json");
  auto* cmd_run = app.add_subcommand("run", "full pipeline");
  auto* cmd_stridge = app.add_subcommand("compare-stridge", "STRidge baseline on the same regression system");
  std::vector<std::string> settings;
  cmd_stridge->add_option("--setting", settings, "LAMBDA,DTOL pair (repeatable)");
  cmd_stridge->add_option("--grid-of-params", params_in, "TOML file with equal-length lambda and d_tol arrays")
      ->check(CLI::ExistingFile);
  cmd_stridge->add_option("--out", table_out, "copy of stridge.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  PipelineConfig cfg;
  try {
    cfg = load(g);
  } catch (const Error& e) {
    return fail("config", exit_code(Stage::config), e.what());
  }

  try {
    if (*cmd_config) {
      if (print_defaults) std::cout << default_config_toml();
      else std::cout << "config ok\n";
      return 0;
    }

    RunLog log(cfg.out_dir, g.verbose);
    if (*cmd_sim) {
      PipelineState st = initial_state(cfg);
      stage_simulate(st);
      if (sim_csv) write_field_csv(*st.measured, std::filesystem::path(cfg.out_dir) / "measured.csv");
      if (!sim_out.empty()) write_field(*st.measured, sim_out);
      const auto s = field_stats(*st.measured);
      std::cout << "wrote " << cfg.out_dir << "/measured.psig (" << st.measured->size() << " values, std "
                << s.std << ")\n";
    } else if (*cmd_denoise) {
      PipelineState st = initial_state(cfg);
      stage_simulate(st);
      stage_denoise(st);
      if (!dn_out.empty()) write_field(*st.denoised, dn_out);
      std::cout << "wrote " << cfg.out_dir << "/denoised.psig and model.psin after "
                << st.report.denoise.epochs << " epochs\n";
      if (st.report.denoise.denoised_residual) {
        std::cout << "residual std / clean std: " << *st.report.denoise.noisy_residual << " -> "
                  << *st.report.denoise.denoised_residual << "\n";
      }
    } else if (*cmd_discover) {
      PipelineState st = initial_state(cfg);
      prepare_system(st, &log);
      stage_select(st);
      st.config.refine_enabled = false;
      stage_report(st);
      if (!trace_out.empty()) write_text(trace_out, dump_json(to_json(st.report.trace)));
      print_report(st.report);
    } else if (*cmd_refine) {
      PipelineState st = initial_state(cfg);
      resume_from_artifacts(st, trace_in, data_in);
      stage_refine(st);
      stage_report(st);
      if (!report_out.empty()) write_text(report_out, dump_json(to_json(st.report)));
      print_report(st.report);
    } else if (*cmd_run) {
      std::vector<double> levels = g.noise.empty() ? std::vector<double>{cfg.noise} : g.noise;
      if (levels.size() == 1) {
        PipelineState st = run_pipeline(cfg, &log);
        print_report(st.report);
      } else {
        std::vector<RunReport> reports;
        for (double level : levels) {
          PipelineConfig c = cfg;
          c.noise = level;
          c.out_dir = (std::filesystem::path(cfg.out_dir) / noise_dir(level)).string();
          try {
            c.validate();
          } catch (const Error& e) {
            return fail("config", exit_code(Stage::config), e.what());
          }
          log("noise level " + std::to_string(level));
          PipelineState st = run_pipeline(c, &log);
          print_report(st.report);
          reports.push_back(st.report);
        }
        write_text(std::filesystem::path(cfg.out_dir) / "table.csv", summary_csv(reports));
      }
    } else if (*cmd_stridge) {
      if (!params_in.empty()) {
        try {
          settings = read_param_grid(params_in);
        } catch (const Error& e) {
          return fail("config", exit_code(Stage::config), e.what());
        }
      }
      if (settings.empty()) settings = {"1e-5,1.0", "1e-1,1.0", "1e-5,0.1", "1e-1,0.1"};
      PipelineState st = initial_state(cfg);
      prepare_system(st, &log);
      nlohmann::json out = nlohmann::json::array();
      std::ostringstream csv;
      csv << "lambda,d_tol,support,equation\n";
      for (const auto& s : settings) {
        double lambda = 0.0, d_tol = 0.0;
        char comma = 0;
        std::istringstream in(s);
        if (!(in >> lambda >> comma >> d_tol) || comma != ',') {
          return fail("config", exit_code(Stage::config), "bad --setting '" + s + "', expected LAMBDA,DTOL");
        }
        st.config.stridge.lambda = lambda;
        st.config.stridge.d_tol = d_tol;
        const StridgeResult r = run_stridge(st);
        std::vector<WeightedTerm> terms;
        for (std::size_t j = 0; j < r.terms.size(); ++j) {
          if (r.coefficients(Eigen::Index(j)) != 0.0) terms.push_back({r.terms[j], r.coefficients(Eigen::Index(j))});
        }
        std::string eq = "u_t = 0";
        if (!terms.empty()) eq = make_equation(terms, EquationOrigin::selection).to_string(6);
        std::string support;
        for (int idx : r.support) support += (support.empty() ? "" : " ") + std::to_string(idx);
        std::cout << "lambda " << lambda << " d_tol " << d_tol << ": " << eq << "\n";
        csv << lambda << "," << d_tol << "," << support << ",\"" << eq << "\"\n";
        out.push_back({{"lambda", lambda},
                       {"d_tol", d_tol},
                       {"support", r.support},
                       {"equation", eq},
                       {"best_tolerance", r.best_tolerance},
                       {"l0_penalty", r.l0_penalty},
                       {"empty", r.empty}});
      }
      const std::filesystem::path dir = cfg.out_dir;
      write_text(dir / "stridge.json",
                 dump_json({{"system", to_string(cfg.system)}, {"noise", cfg.noise}, {"seeds", st.report.seeds},
                            {"settings", out}}));
      write_text(dir / "stridge.csv", csv.str());
      if (!table_out.empty()) write_text(table_out, csv.str());
    }
  } catch (const StageError& e) {
    return fail(to_string(e.stage()), exit_code(e.stage()), e.what());
  } catch (const Error& e) {
    return fail("report", exit_code(Stage::report), e.what());
  }
  return 0;
}
