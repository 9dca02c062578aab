#include "psipde/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace psipde {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json axis_json(const Axis& a) { return {{"min", a.min}, {"max", a.max}, {"n", a.n}}; }
Axis axis_from(const json& j) { return {j.at("min").get<double>(), j.at("max").get<double>(), j.at("n").get<std::size_t>()}; }

json grid_json(const Grid& g) {
  json j = {{"t", axis_json(g.t)}, {"x", axis_json(g.x)}};
  if (g.y) j["y"] = axis_json(*g.y);
  return j;
}
Grid grid_from(const json& j) {
  Grid g;
  g.t = axis_from(j.at("t"));
  g.x = axis_from(j.at("x"));
  if (j.contains("y")) g.y = axis_from(j.at("y"));
  return g;
}

EquationOrigin origin_from(const std::string& s) {
  for (auto o : {EquationOrigin::selection, EquationOrigin::branch, EquationOrigin::refined}) {
    if (s == to_string(o)) return o;
  }
  throw Error(ErrorCode::invalid_argument, "unknown equation origin '" + s + "'");
}

json error_json(const ErrorSummary& e) {
  return {{"rms", num(e.rms)},
          {"rms_relative", num(e.rms_relative)},
          {"max_relative", num(e.max_relative)},
          {"at_max", {{"t", e.t_at_max}, {"x", e.x_at_max}, {"y", e.y_at_max}}},
          {"max_pointwise", num(e.max_pointwise)},
          {"at_pointwise", {{"t", e.t_at_pointwise}, {"x", e.x_at_pointwise}, {"y", e.y_at_pointwise}}}};
}
ErrorSummary error_from(const json& j) {
  ErrorSummary e;
  e.rms = num_from(j.at("rms"));
  e.rms_relative = num_from(j.at("rms_relative"));
  e.max_relative = num_from(j.at("max_relative"));
  e.t_at_max = j.at("at_max").at("t").get<double>();
  e.x_at_max = j.at("at_max").at("x").get<double>();
  e.y_at_max = j.at("at_max").at("y").get<double>();
  e.max_pointwise = num_from(j.at("max_pointwise"));
  e.t_at_pointwise = j.at("at_pointwise").at("t").get<double>();
  e.x_at_pointwise = j.at("at_pointwise").at("x").get<double>();
  e.y_at_pointwise = j.at("at_pointwise").at("y").get<double>();
  return e;
}

json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double d : v) a.push_back(num(d));
  return a;
}
std::vector<double> doubles_from(const json& j) {
  std::vector<double> v;
  for (const auto& e : j) v.push_back(num_from(e));
  return v;
}

json labels(const std::vector<TermSpec>& terms) {
  json a = json::array();
  for (const auto& t : terms) a.push_back(t.label());
  return a;
}

SelectionConfig selection_config_from(const json& j) {
  SelectionConfig c;
  c.n_val = j.at("n_val").get<int>();
  c.split = j.at("split").get<double>();
  c.gamma_reg = j.at("gamma_reg").get<double>();
  c.gamma_bic = j.at("gamma_bic").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.branch_tolerance = j.at("branch_tolerance").get<double>();
  c.max_terms = j.at("max_terms").get<int>();
  c.max_branches = j.at("max_branches").get<int>();
  c.stop_rule = parse_stop_rule(j.at("stop_rule").get<std::string>());
  return c;
}

}  // namespace

SelectionTrace selection_trace_from_json(const json& j) {
  SelectionTrace tr;
  tr.config = selection_config_from(j.at("config"));
  for (const auto& s : j.at("steps")) {
    SelectionStep st;
    st.branch = s.at("branch").get<int>();
    st.step = s.at("step").get<int>();
    st.mode = s.at("mode").get<std::string>() == "drop_one" ? ScreenMode::drop_one : ScreenMode::add_one;
    st.base = s.at("base").get<std::vector<int>>();
    st.column_index = s.at("column_index").get<std::vector<int>>();
    st.mean_reg = doubles_from(s.at("mean_reg"));
    st.std_reg = doubles_from(s.at("std_reg"));
    st.mean_bic = doubles_from(s.at("mean_bic"));
    st.std_bic = doubles_from(s.at("std_bic"));
    st.ref_reg = num_from(s.at("ref_reg"));
    st.ref_bic = num_from(s.at("ref_bic"));
    st.spread_reg = num_from(s.at("spread_reg"));
    st.spread_bic = num_from(s.at("spread_bic"));
    st.chosen = s.at("chosen").get<std::vector<int>>();
    st.alternates = s.at("alternates").get<std::vector<int>>();
    st.outcome = s.at("outcome").get<std::string>();
    tr.steps.push_back(std::move(st));
  }
  for (const auto& b : j.at("branches")) {
    SelectionBranch br;
    br.id = b.at("id").get<int>();
    br.parent = b.at("parent").get<int>();
    br.support = b.at("support").get<std::vector<int>>();
    for (const auto& l : b.at("terms")) br.terms.push_back(parse_term(l.get<std::string>()));
    for (std::size_t k = 0; k < br.terms.size(); ++k) br.terms[k].index = br.support.at(k);
    const auto c = doubles_from(b.at("coefficients"));
    br.coefficients = Eigen::Map<const Eigen::VectorXd>(c.data(), Eigen::Index(c.size()));
    br.stop_reason = b.at("stop_reason").get<std::string>();
    tr.branches.push_back(std::move(br));
  }
  tr.dropped_columns = j.at("dropped_columns").get<std::vector<int>>();
  tr.rank_deficient = j.at("rank_deficient").get<bool>();
  tr.library_size = j.at("library_size").get<int>();
  return tr;
}

namespace {

RefineReport refine_from(const json& j) {
  RefineReport rep;
  for (const auto& c : j.at("candidates")) {
    CandidateResult r;
    r.id = c.at("id").get<int>();
    r.source = c.at("source").get<std::string>();
    r.initial = equation_from_json(c.at("initial"));
    r.optimized = equation_from_json(c.at("optimized"));
    r.loss_history = doubles_from(c.at("loss_history"));
    r.initial_loss = num_from(c.at("initial_loss"));
    r.final_loss = num_from(c.at("final_loss"));
    r.errors = error_from(c.at("errors"));
    r.insignificant = c.at("insignificant").get<std::vector<std::string>>();
    r.unstable = c.at("unstable").get<bool>();
    r.stalled = c.at("stalled").get<bool>();
    r.iterations = c.at("iterations").get<int>();
    r.failure = c.at("failure").get<std::string>();
    rep.candidates.push_back(std::move(r));
  }
  rep.winner = j.at("winner").get<int>();
  rep.rationale = j.at("rationale").get<std::string>() == "lowest_loss" ? Rationale::lowest_loss
                                                                        : Rationale::parsimony_tiebreak;
  rep.loss_target = j.at("loss_target").get<std::string>();
  return rep;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

std::string join(const std::vector<int>& v, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

bool wants(const std::vector<std::string>& formats, const char* f) {
  return std::find(formats.begin(), formats.end(), f) != formats.end();
}

}  // namespace

json to_json(const CandidateEquation& eq) {
  json terms = json::array();
  for (const auto& wt : eq.terms) {
    terms.push_back({{"term", wt.term.label()}, {"index", wt.term.index}, {"coefficient", num(wt.coefficient)}});
  }
  return {{"equation", eq.to_string(6)},
          {"terms", terms},
          {"fit_rms", num(eq.fit_rms)},
          {"origin", to_string(eq.origin)}};
}

CandidateEquation equation_from_json(const json& j) {
  std::vector<WeightedTerm> terms;
  for (const auto& t : j.at("terms")) {
    TermSpec spec = parse_term(t.at("term").get<std::string>());
    spec.index = t.at("index").get<int>();
    terms.push_back({spec, num_from(t.at("coefficient"))});
  }
  CandidateEquation eq;
  eq.terms = terms;
  for (const auto& wt : terms) eq.support.insert(wt.term.index);
  eq.fit_rms = num_from(j.at("fit_rms"));
  eq.origin = origin_from(j.at("origin").get<std::string>());
  return eq;
}

json to_json(const SelectionTrace& tr) {
  const auto& c = tr.config;
  json j;
  j["config"] = {{"n_val", c.n_val},
                 {"split", c.split},
                 {"gamma_reg", c.gamma_reg},
                 {"gamma_bic", c.gamma_bic},
                 {"seed", c.seed},
                 {"branch_tolerance", c.branch_tolerance},
                 {"max_terms", c.max_terms},
                 {"max_branches", c.max_branches},
                 {"stop_rule", to_string(c.stop_rule)}};
  j["steps"] = json::array();
  for (const auto& s : tr.steps) {
    j["steps"].push_back({{"branch", s.branch},
                          {"step", s.step},
                          {"mode", to_string(s.mode)},
                          {"base", s.base},
                          {"column_index", s.column_index},
                          {"mean_reg", doubles(s.mean_reg)},
                          {"std_reg", doubles(s.std_reg)},
                          {"mean_bic", doubles(s.mean_bic)},
                          {"std_bic", doubles(s.std_bic)},
                          {"ref_reg", num(s.ref_reg)},
                          {"ref_bic", num(s.ref_bic)},
                          {"spread_reg", num(s.spread_reg)},
                          {"spread_bic", num(s.spread_bic)},
                          {"chosen", s.chosen},
                          {"alternates", s.alternates},
                          {"outcome", s.outcome}});
  }
  j["branches"] = json::array();
  for (const auto& b : tr.branches) {
    std::vector<double> coef(b.coefficients.data(), b.coefficients.data() + b.coefficients.size());
    j["branches"].push_back({{"id", b.id},
                             {"parent", b.parent},
                             {"support", b.support},
                             {"terms", labels(b.terms)},
                             {"coefficients", doubles(coef)},
                             {"stop_reason", b.stop_reason}});
  }
  j["dropped_columns"] = tr.dropped_columns;
  j["rank_deficient"] = tr.rank_deficient;
  j["library_size"] = tr.library_size;
  return j;
}

json to_json(const RefineReport& rep) {
  json cands = json::array();
  for (const auto& c : rep.candidates) {
    cands.push_back({{"id", c.id},
                     {"source", c.source},
                     {"initial", to_json(c.initial)},
                     {"optimized", to_json(c.optimized)},
                     {"loss_history", doubles(c.loss_history)},
                     {"initial_loss", num(c.initial_loss)},
                     {"final_loss", num(c.final_loss)},
                     {"errors", error_json(c.errors)},
                     {"insignificant", c.insignificant},
                     {"unstable", c.unstable},
                     {"stalled", c.stalled},
                     {"iterations", c.iterations},
                     {"failure", c.failure}});
  }
  return {{"candidates", cands},
          {"winner", rep.winner},
          {"rationale", to_string(rep.rationale)},
          {"loss_target", rep.loss_target}};
}

json to_json(const RunReport& r) {
  json j;
  j["system"] = r.system;
  j["noise"] = r.noise;
  j["input"] = r.input;
  j["seed"] = r.seed;
  j["seeds"] = r.seeds;
  j["grid"] = grid_json(r.grid);
  j["denoise"] = {{"ran", r.denoise.ran},
                  {"epochs", r.denoise.epochs},
                  {"best_epoch", r.denoise.best_epoch},
                  {"best_val_loss", num(r.denoise.best_val_loss)},
                  {"noisy_residual", opt(r.denoise.noisy_residual)},
                  {"denoised_residual", opt(r.denoise.denoised_residual)}};
  j["library"] = {{"size", r.library_size},
                  {"rows", r.library_rows},
                  {"regression_rows", r.regression_rows},
                  {"fft", r.fft},
                  {"cutoff_fraction", r.cutoff_fraction}};
  j["selection"] = to_json(r.trace);
  j["refine"] = r.refine ? to_json(*r.refine) : json(nullptr);
  j["ic_source"] = r.ic_source;
  j["equation"] = to_json(r.equation);
  json truth = json::array();
  for (const auto& wt : r.truth) truth.push_back({{"term", wt.term.label()}, {"coefficient", wt.coefficient}});
  j["truth"] = truth;
  json errs = json::array();
  for (const auto& e : r.coefficient_errors) {
    errs.push_back({{"term", e.term},
                    {"truth", e.truth},
                    {"learned", opt(e.learned)},
                    {"relative_error", opt(e.relative_error)}});
  }
  j["coefficient_errors"] = errs;
  j["support_matches"] = r.support_matches ? json(*r.support_matches) : json(nullptr);
  return j;
}

RunReport run_report_from_json(const json& j) {
  RunReport r;
  r.system = j.at("system").get<std::string>();
  r.noise = j.at("noise").get<double>();
  r.input = j.at("input").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  r.grid = grid_from(j.at("grid"));
  const auto& d = j.at("denoise");
  r.denoise.ran = d.at("ran").get<bool>();
  r.denoise.epochs = d.at("epochs").get<int>();
  r.denoise.best_epoch = d.at("best_epoch").get<int>();
  r.denoise.best_val_loss = num_from(d.at("best_val_loss"));
  r.denoise.noisy_residual = opt_from(d.at("noisy_residual"));
  r.denoise.denoised_residual = opt_from(d.at("denoised_residual"));
  const auto& l = j.at("library");
  r.library_size = l.at("size").get<int>();
  r.library_rows = l.at("rows").get<std::size_t>();
  r.regression_rows = l.at("regression_rows").get<std::size_t>();
  r.fft = l.at("fft").get<bool>();
  r.cutoff_fraction = l.at("cutoff_fraction").get<double>();
  r.trace = selection_trace_from_json(j.at("selection"));
  if (!j.at("refine").is_null()) r.refine = refine_from(j.at("refine"));
  r.ic_source = j.at("ic_source").get<std::string>();
  r.equation = equation_from_json(j.at("equation"));
  for (const auto& t : j.at("truth")) {
    r.truth.push_back({parse_term(t.at("term").get<std::string>()), t.at("coefficient").get<double>()});
  }
  for (const auto& e : j.at("coefficient_errors")) {
    r.coefficient_errors.push_back({e.at("term").get<std::string>(), e.at("truth").get<double>(),
                                    opt_from(e.at("learned")), opt_from(e.at("relative_error"))});
  }
  if (!j.at("support_matches").is_null()) r.support_matches = j.at("support_matches").get<bool>();
  return r;
}

std::vector<CoefficientError> coefficient_errors(const CandidateEquation& learned,
                                                 const std::vector<WeightedTerm>& truth) {
  std::vector<CoefficientError> out;
  for (const auto& t : truth) {
    CoefficientError e;
    e.term = t.term.label();
    e.truth = t.coefficient;
    for (const auto& wt : learned.terms) {
      if (wt.term.same_shape(t.term)) e.learned = wt.coefficient;
    }
    if (e.learned && t.coefficient != 0.0) e.relative_error = (*e.learned - t.coefficient) / std::abs(t.coefficient);
    out.push_back(e);
  }
  return out;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

std::string summary_csv(const std::vector<RunReport>& reports) {
  std::vector<std::string> terms;
  for (const auto& r : reports) {
    for (const auto& e : r.coefficient_errors) {
      if (std::find(terms.begin(), terms.end(), e.term) == terms.end()) terms.push_back(e.term);
    }
  }
  std::ostringstream o;
  o << "system,noise,equation,support,support_matches";
  for (const auto& t : terms) o << "," << csv_quote("coef " + t) << "," << csv_quote("rel_err " + t);
  o << "\n";
  for (const auto& r : reports) {
    std::vector<int> support(r.equation.support.begin(), r.equation.support.end());
    o << r.system << "," << fmt(r.noise) << "," << csv_quote(r.equation.to_string(6)) << "," << join(support) << ","
      << (r.support_matches ? (*r.support_matches ? "true" : "false") : "");
    for (const auto& t : terms) {
      std::string c, e;
      for (const auto& ce : r.coefficient_errors) {
        if (ce.term != t) continue;
        if (ce.learned) c = fmt(*ce.learned);
        if (ce.relative_error) e = fmt(*ce.relative_error);
      }
      o << "," << c << "," << e;
    }
    o << "\n";
  }
  return o.str();
}

std::string candidates_csv(const RunReport& rep) {
  std::ostringstream o;
  o << "id,source,initial,optimized,initial_loss,final_loss,max_relative,max_pointwise,iterations,stalled,unstable,"
       "insignificant,winner\n";
  if (!rep.refine) return o.str();
  for (std::size_t i = 0; i < rep.refine->candidates.size(); ++i) {
    const auto& c = rep.refine->candidates[i];
    std::string insig;
    for (const auto& s : c.insignificant) insig += (insig.empty() ? "" : " ") + s;
    o << c.id << "," << csv_quote(c.source) << "," << csv_quote(c.initial.to_string(6)) << ","
      << csv_quote(c.optimized.to_string(6)) << "," << fmt(c.initial_loss) << "," << fmt(c.final_loss) << ","
      << fmt(c.errors.max_relative) << "," << fmt(c.errors.max_pointwise) << "," << c.iterations << ","
      << (c.stalled ? "true" : "false") << "," << (c.unstable ? "true" : "false") << "," << csv_quote(insig) << ","
      << (int(i) == rep.refine->winner ? "true" : "false") << "\n";
  }
  return o.str();
}

std::string trace_csv(const SelectionTrace& tr) {
  std::ostringstream o;
  o << "branch,step,mode,base,chosen,alternates,ref_reg,spread_reg,ref_bic,spread_bic,outcome\n";
  for (const auto& s : tr.steps) {
    o << s.branch << "," << s.step << "," << to_string(s.mode) << "," << join(s.base) << "," << join(s.chosen) << ","
      << join(s.alternates) << "," << fmt(s.ref_reg) << "," << fmt(s.spread_reg) << "," << fmt(s.ref_bic) << ","
      << fmt(s.spread_bic) << "," << s.outcome << "\n";
  }
  return o.str();
}

void write_plot_data(const FieldTensor& measured, const FieldTensor& learned, const std::filesystem::path& path) {
  const Grid& g = measured.grid();
  if (!(learned.grid() == g)) throw Error(ErrorCode::dimension_mismatch, "plot fields must share a grid");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  out.precision(10);
  out << (g.y ? "t,x,y,measured,learned,residual\n" : "t,x,measured,learned,residual\n");
  for (std::size_t it = 0; it < g.nt(); ++it) {
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
      for (std::size_t iy = 0; iy < g.ny(); ++iy) {
        const double m = measured(it, ix, iy), l = learned(it, ix, iy);
        out << g.t.at(it) << "," << g.x.at(ix) << ",";
        if (g.y) out << g.y->at(iy) << ",";
        out << m << "," << l << "," << (l - m) << "\n";
      }
    }
  }
  if (!out) throw Error(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

void emit_report(const RunReport& rep, const std::vector<std::string>& formats, const std::filesystem::path& dir,
                 const FieldTensor* measured, const FieldTensor* learned) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_failure, "cannot create '" + dir.string() + "': " + ec.message());
  if (wants(formats, "json")) write_text(dir / "report.json", dump_json(to_json(rep)));
  if (wants(formats, "csv")) {
    write_text(dir / "summary.csv", summary_csv({rep}));
    write_text(dir / "candidates.csv", candidates_csv(rep));
    write_text(dir / "trace.csv", trace_csv(rep.trace));
  }
  if (wants(formats, "plot-data") && measured && learned) write_plot_data(*measured, *learned, dir / "fields.csv");
}

}  // namespace psipde
