// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Usage:
//   psipde_acceptance WORK_DIR [criterion ...]
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "psipde/baseline.hpp"
#include "psipde/denoise.hpp"
#include "psipde/featlib.hpp"
#include "psipde/pipeline.hpp"
#include "psipde/refine.hpp"
#include "psipde/select.hpp"
#include "psipde/simulate.hpp"
#include "psipde/spectral.hpp"

using namespace psipde;
namespace fs = std::filesystem;

namespace {

// Tolerances, all relative unless noted.
constexpr double kBurgersAdvTol = 0.05;
constexpr double kBurgersDiffTol = 0.30;
constexpr double kKdvAdvTol = 0.05;
constexpr double kKdvDispTol = 0.25;
constexpr double k2dAdvTol = 0.08;
constexpr double k2dDiffTol = 0.05;
constexpr double kSelectionTol = 0.10;        // criterion 4
constexpr double kDenoiseResidual = 0.05;     // criterion 5, fraction of std(clean)
constexpr double kFftCutoff = 0.2;            // criterion 6
constexpr double kModeFloor = 0.01;           // criterion 6, modes below this fraction of the largest are skipped
constexpr double kWrongBranchPointwise = 0.5;  // criterion 7
constexpr double kNearOrigin = 0.1;           // criterion 7, |x| band around the front
constexpr double kWinnerMaxError = 0.05;      // criterion 7
constexpr double kShrinkFactor = 5.0;         // criterion 7
constexpr int kOracleTrials = 100;            // criterion 9
constexpr int kOracleRequired = 95;
constexpr double kGradTol = 1e-4;  // criterion 10
constexpr double kParsevalTol = 1e-9;
constexpr double kConvergenceTol = 0.01;

const double kNu = 0.01 / std::numbers::pi;

fs::path g_work;
std::map<std::string, PipelineState> g_runs;
int g_failed = 0;

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

void verdict(int n, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n, what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string noise_tag(double noise) { return std::to_string(int(std::lround(noise * 100))); }

// Full pipeline with default settings, cached per (system, noise).
const PipelineState& pipeline(SystemKind sys, double noise) {
  const std::string key = std::string(to_string(sys)) + "_" + noise_tag(noise);
  if (auto it = g_runs.find(key); it != g_runs.end()) return it->second;
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.system = sys;
  cfg.noise = noise;
  cfg.out_dir = (g_work / key).string();
  const auto t0 = std::chrono::steady_clock::now();
  PipelineState st = run_pipeline(cfg);
  detail("%s at %s%% noise: %s  (%.0f s)", to_string(sys), noise_tag(noise).c_str(),
         st.report.equation.to_string(6).c_str(), seconds_since(t0));
  return g_runs.emplace(key, std::move(st)).first->second;
}

std::optional<double> coefficient(const CandidateEquation& eq, int index) {
  for (const auto& wt : eq.terms) {
    if (wt.term.index == index) return wt.coefficient;
  }
  return std::nullopt;
}

bool within(std::optional<double> got, double want, double tol) {
  return got && std::abs(*got / want - 1.0) <= tol;
}

// Support {a, b} with both coefficients inside their relative bands.
bool recovered(const PipelineState& st, int a, double want_a, double tol_a, int b, double want_b, double tol_b) {
  const auto& eq = st.report.equation;
  const bool support = eq.support == std::set<int>{a, b};
  const auto ca = coefficient(eq, a), cb = coefficient(eq, b);
  const bool ok = support && within(ca, want_a, tol_a) && within(cb, want_b, tol_b);
  detail("  support %s, coefficients %s / %s -> %s", support ? "ok" : "wrong",
         ca ? std::to_string(*ca).c_str() : "-", cb ? std::to_string(*cb).c_str() : "-", ok ? "ok" : "miss");
  return ok;
}

void criterion1() {
  bool ok = true;
  for (double noise : {0.0, 0.1, 0.2, 0.5}) {
    ok &= recovered(pipeline(SystemKind::burgers1d, noise), 6, -1.0, kBurgersAdvTol, 9, kNu, kBurgersDiffTol);
  }
  verdict(1, ok, "Burgers support {u*u_x, u_xx} and coefficients at 0/10/20/50% noise");
}

void criterion2() {
  bool ok = true;
  for (double noise : {0.0, 0.1, 0.2, 0.5}) {
    ok &= recovered(pipeline(SystemKind::kdv, noise), 6, -1.0, kKdvAdvTol, 13, -0.0025, kKdvDispTol);
  }
  verdict(2, ok, "KdV support {u*u_x, u_xxx} and coefficients at 0/10/20/50% noise");
}

void criterion3() {
  bool ok = true;
  for (double noise : {0.0, 0.2, 0.4}) {
    ok &= recovered(pipeline(SystemKind::burgers2d, noise), 6, -1.0, k2dAdvTol, 9, 0.01, k2dDiffTol);
  }
  // failure at 50% is allowed; the outcome is only reported
  const bool at50 = recovered(pipeline(SystemKind::burgers2d, 0.5), 6, -1.0, k2dAdvTol, 9, 0.01, k2dDiffTol);
  detail("2D Burgers at 50%% noise: %s (allowed to fail)", at50 ? "recovered" : "not recovered");
  verdict(3, ok, "2D Burgers grouped support and coefficients at 0/20/40% noise");
}

void criterion4() {
  const auto& tr = pipeline(SystemKind::burgers1d, 0.0).report.trace;
  const auto& b = tr.branches.at(0);
  std::optional<double> adv, diff;
  for (std::size_t k = 0; k < b.support.size(); ++k) {
    if (b.support[k] == 6) adv = b.coefficients(Eigen::Index(k));
    if (b.support[k] == 9) diff = b.coefficients(Eigen::Index(k));
  }
  const bool support = std::set<int>(b.support.begin(), b.support.end()) == std::set<int>{6, 9};
  detail("main branch: advection %s, diffusion*pi %s (reference -0.9886, 0.024)", adv ? std::to_string(*adv).c_str() : "-",
         diff ? std::to_string(*diff * std::numbers::pi).c_str() : "-");
  const bool ok = support && within(adv, -0.9886, kSelectionTol) && within(diff, 0.024 / std::numbers::pi, kSelectionTol);
  verdict(4, ok, "clean Burgers selection-stage coefficients within 10% of (-0.9886, 0.024/pi)");
}

void criterion5() {
  const auto& d = pipeline(SystemKind::burgers1d, 0.1).report.denoise;
  const double before = d.noisy_residual.value_or(NAN), after = d.denoised_residual.value_or(NAN);
  detail("residual std / std(clean): %.4f before, %.4f after", before, after);
  verdict(5, after <= kDenoiseResidual, "denoised 10%-noise Burgers residual <= 5% of std(clean)");
}

// Mean over modes of |noisy - clean| / |clean| for one transformed column.
// The clean field is odd in x, so many clean coefficients are round-off;
// like the pointwise error in refine, modes under kModeFloor of the largest
// are left out.
std::pair<double, double> mode_errors(const Library& clean, const Library& other, int col) {
  const auto a = to_freq(clean, 1.0), b = to_freq(other, 1.0);
  const auto modes = block_modes(clean.matrix.rows);
  const double floor = kModeFloor * a.theta.col(col).cwiseAbs().maxCoeff();
  double all = 0, low = 0;
  std::size_t n_all = 0, n_low = 0;
  for (Eigen::Index k = 0; k < a.theta.rows(); ++k) {
    const double ref = std::abs(a.theta(k, col));
    if (ref < floor || ref == 0.0) continue;
    const double e = std::abs(b.theta(k, col) - a.theta(k, col)) / ref;
    all += e;
    ++n_all;
    // to_freq at cutoff 1 keeps every mode in block order
    if (modes.radius[std::size_t(k)] <= kFftCutoff) {
      low += e;
      ++n_low;
    }
  }
  return {low / double(n_low), all / double(n_all)};
}

void criterion6() {
  const auto& st = pipeline(SystemKind::burgers1d, 0.5);
  auto lib = [](const FieldTensor& f) { return build_library(f, differentiate(f, {})); };
  const Library clean = lib(*st.clean), noisy = lib(*st.measured), denoised = lib(*st.denoised);
  const int uxx = 8;
  const auto [low_n, all_n] = mode_errors(clean, noisy, uxx);
  const auto [low_d, all_d] = mode_errors(clean, denoised, uxx);
  detail("u_xx mean relative error, noisy: low %.4g, all %.4g", low_n, all_n);
  detail("u_xx mean relative error, denoised: low %.4g, all %.4g", low_d, all_d);
  const bool ok = low_n < all_n && low_d < low_n && all_d < all_n;
  verdict(6, ok, "low modes less perturbed than all modes; denoising lowers both");
}

WeightedTerm term(const std::string& label, double c) {
  TermSpec t = parse_term(label);
  t.index = 4 * t.deriv_x + t.poly_power + 1;
  return {t, c};
}

void criterion7() {
  const auto spec = SimSpec::defaults(SystemKind::burgers1d);
  const auto data = simulate(spec);
  const auto bench = benchmark_setup(spec);
  const SolveContext ctx{spec.grid, bench.solver, bench.ic};
  const auto lib = build_library(data, differentiate(data, {}));
  std::map<int, double> norms;
  for (std::size_t j = 0; j < lib.matrix.terms.size(); ++j) norms[lib.matrix.terms[j].index] = lib.matrix.column_norms[j];
  const std::vector<CandidateInput> cands = {
      {make_equation({term("u*u_x", -0.9886), term("u_xx", 0.024 / std::numbers::pi)}, EquationOrigin::branch), "a"},
      {make_equation({term("u*u_x", -0.9886), term("u^2*u_xx", 0.0075)}, EquationOrigin::branch), "b"},
      {make_equation({term("u*u_x", -1.0101), term("u_xx", 0.0086 / std::numbers::pi), term("u^2*u_xx", 0.0047)},
                     EquationOrigin::branch),
       "c"}};
  const auto t0 = std::chrono::steady_clock::now();
  RefineConfig cfg;
  cfg.prune_fraction = 0.0;  // keep the three-term candidate intact for the shrink check
  const auto rep = adjudicate(cands, data, ctx, norms, cfg);
  detail("refined 3 candidates in %.0f s", seconds_since(t0));
  for (const auto& c : rep.candidates) {
    detail("candidate %s: %s  loss %.3g  max err %.3g  max pointwise %.3g at x=%.3f", c.source.c_str(),
           c.optimized.to_string(6).c_str(), c.final_loss, c.errors.max_relative, c.errors.max_pointwise,
           c.errors.x_at_pointwise);
  }
  const auto& wrong = rep.candidates[1];
  const bool wrong_ok = wrong.errors.max_pointwise > kWrongBranchPointwise &&
                        std::abs(wrong.errors.x_at_pointwise) <= kNearOrigin;
  const auto& win = rep.winning();
  const bool win_ok = win.optimized.support == std::set<int>{6, 9} && win.errors.max_relative < kWinnerMaxError;
  const double before = *coefficient(rep.candidates[2].initial, 11);
  const double after = *coefficient(rep.candidates[2].optimized, 11);
  const bool shrink_ok = std::abs(after) * kShrinkFactor <= std::abs(before);
  detail("{6,11} pointwise > 50%% near x=0: %s; winner {6,9} below 5%%: %s; u^2*u_xx %.4g -> %.4g (x%.2f): %s",
         wrong_ok ? "yes" : "no", win_ok ? "yes" : "no", before, after, before / after, shrink_ok ? "yes" : "no");
  verdict(7, wrong_ok && win_ok && shrink_ok, "branch behaviour of the three Burgers candidates");
}

void criterion8() {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.noise = 0.2;
  cfg.out_dir = (g_work / "stridge").string();
  cfg.denoise_enabled = false;
  cfg.fft_enabled = false;
  cfg.diff.scheme = DiffScheme::poly_interp;
  PipelineState st = initial_state(cfg);
  prepare_system(st);
  std::set<std::vector<int>> supports;
  bool none_true = true;
  for (auto [lambda, d_tol] : std::vector<std::pair<double, double>>{{1e-5, 1.0}, {1e-1, 1.0}, {1e-5, 0.1}, {1e-1, 0.1}}) {
    st.config.stridge.lambda = lambda;
    st.config.stridge.d_tol = d_tol;
    const auto r = run_stridge(st);
    std::string s;
    for (std::size_t k = 0; k < r.support.size(); ++k) {
      s += " " + r.terms[std::size_t(r.support[k] - 1)].label() + "=" +
           std::to_string(r.coefficients(Eigen::Index(r.support[k] - 1)));
    }
    detail("lambda %g, d_tol %g:%s", lambda, d_tol, s.empty() ? " (empty)" : s.c_str());
    supports.insert(r.support);
    none_true &= r.support != std::vector<int>{6, 9};
  }
  verdict(8, supports.size() >= 2 && none_true, "STRidge supports vary with hyperparameters and miss {u*u_x, u_xx}");
}

void criterion9() {
  int agree = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < kOracleTrials; ++t) {
    const auto p = oracle::random_sparse_problem(1000 + std::uint64_t(t));
    SelectionConfig cfg;
    cfg.seed = 5000 + std::uint64_t(t);
    const auto tr = psi_select(p.system, cfg);
    const std::set<int> got(tr.branches[0].support.begin(), tr.branches[0].support.end());
    const auto want = oracle::best_subset(p.system, cfg.n_val, cfg.split, cfg.seed, cfg.gamma_reg);
    if (got == want) {
      ++agree;
    } else {
      std::string g, w;
      for (int i : got) g += " " + std::to_string(i);
      for (int i : want) w += " " + std::to_string(i);
      detail("trial %d disagrees: selected {%s }, best subset {%s }", t, g.c_str(), w.c_str());
    }
  }
  detail("%d / %d agree (%.0f s)", agree, kOracleTrials, seconds_since(t0));
  verdict(9, agree >= kOracleRequired, "selection matches exhaustive best subset on random sparse systems");
}

void criterion10() {
  // backprop on a surrogate trained on noisy Burgers
  auto spec = SimSpec::defaults(SystemKind::burgers1d);
  const auto noisy = add_noise(simulate(spec), {0.1, 1});
  TrainConfig tc;
  tc.max_epochs = 20;
  const auto model = fit_surrogate(noisy, tc);
  const Eigen::MatrixXd pts = grid_coordinates(noisy.grid()).leftCols(2000);
  const Eigen::RowVectorXd y = Eigen::Map<const Eigen::RowVectorXd>(noisy.values().data(), 2000);
  const double grad = finite_diff_gradient_check(model, pts, y, 20, 1e-6, 2);

  const auto lib = build_library(noisy, differentiate(noisy, {}));
  const auto modes = block_modes(lib.matrix.rows);
  double parseval = 0;
  for (Eigen::Index j = 0; j < lib.matrix.columns.cols(); ++j) {
    const Eigen::VectorXd col = lib.matrix.columns.col(j);
    const auto c = block_transform(col, modes);
    double s = 0;
    for (std::size_t k = 0; k < c.size(); ++k) s += modes.multiplicity[k] * std::norm(c[k]);
    if (col.squaredNorm() > 0) parseval = std::max(parseval, std::abs(s / col.squaredNorm() - 1));
  }

  SimSpec coarse = SimSpec::defaults(SystemKind::burgers1d);
  coarse.grid = Grid::make_1d({0, 1, 51}, {-1, 1, 129});
  SimSpec fine = coarse;
  fine.grid = Grid::make_1d({0, 1, 101}, {-1, 1, 257});
  const auto a = simulate(coarse), b = simulate(fine);
  double num = 0, den = 0;
  for (std::size_t it = 0; it < a.grid().nt(); ++it) {
    for (std::size_t ix = 0; ix < a.grid().nx(); ++ix) {
      num += std::pow(a(it, ix) - b(2 * it, 2 * ix), 2);
      den += std::pow(b(2 * it, 2 * ix), 2);
    }
  }
  const double conv = std::sqrt(num / den);
  detail("gradient check %.3g, Parseval %.3g, self-convergence %.3g", grad, parseval, conv);
  verdict(10, grad < kGradTol && parseval < kParsevalTol && conv < kConvergenceTol, "numerical hygiene");
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::create_directories(g_work);
  std::set<int> wanted;
  for (int i = 2; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const std::vector<std::function<void()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = int(i) + 1;
    if (!wanted.empty() && !wanted.count(n)) continue;
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      detail("error: %s", e.what());
      verdict(n, false, "aborted");
    }
  }
  std::printf("%d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
