#include "psipde/config.hpp"

#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace psipde {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::config_error, msg); }

class TomlParser {
 public:
  explicit TomlParser(const std::string& text) : s_(text) {}

  TomlDocument parse() {
    TomlDocument doc;
    std::string table;
    std::set<std::string> tables;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        skip_inline_ws();
        table = bare_key();
        while (peek() == '.') {
          ++pos_;
          table += "." + bare_key();
        }
        skip_inline_ws();
        expect(']');
        if (!tables.insert(table).second) error("duplicate table [" + table + "]");
      } else {
        std::string key = bare_key();
        skip_inline_ws();
        expect('=');
        skip_inline_ws();
        TomlValue v = value();
        const std::string full = table.empty() ? key : table + "." + key;
        if (doc.count(full)) error("duplicate key '" + full + "'");
        doc.emplace(full, std::move(v));
      }
      end_of_line();
    }
    return doc;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  [[noreturn]] void error(const std::string& msg) const { fail("line " + std::to_string(line_) + ": " + msg); }

  void expect(char c) {
    if (peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline_ws() {
    while (peek() == ' ' || peek() == '\t') ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  void skip_ws_comments_newlines() {
    while (!eof()) {
      skip_inline_ws();
      skip_comment();
      if (peek() == '\r') {
        ++pos_;
      } else if (peek() == '\n') {
        ++pos_;
        ++line_;
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (!eof() && peek() != '\n') error("unexpected trailing characters");
  }

  std::string bare_key() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (pos_ == start) error("expected a key");
    return s_.substr(start, pos_ - start);
  }

  TomlValue value() {
    const char c = peek();
    if (c == '"') return {string()};
    if (c == '[') return {array()};
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return {true};
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return {false};
    }
    return number();
  }

  std::string string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') error("unterminated string");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (eof()) error("unterminated string");
        char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: error(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  TomlArray array() {
    expect('[');
    TomlArray out;
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      TomlValue v = value();
      if (std::holds_alternative<TomlArray>(v.v)) error("nested arrays are not supported");
      out.push_back(std::move(v));
      skip_ws_comments_newlines();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        error("expected ',' or ']' in array");
      }
    }
  }

  TomlValue number() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    std::erase(tok, '_');
    if (tok.empty()) error("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "+inf" ||
                          tok == "-inf" || tok == "nan";
    const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
    const char* e = tok.data() + tok.size();
    if (is_float) {
      double d = 0.0;
      auto [p, ec] = std::from_chars(b, e, d);
      if (ec != std::errc() || p != e) error("invalid number '" + tok + "'");
      return {d};
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(b, e, i);
    if (ec != std::errc() || p != e) error("invalid value '" + tok + "'");
    return {i};
  }
};

// Consumes keys from a document; anything left over is an unknown key.
class Binder {
 public:
  explicit Binder(TomlDocument doc) : doc_(std::move(doc)) {}

  const TomlValue* take(const std::string& key) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return nullptr;
    taken_.insert(key);
    return &it->second;
  }

  void get(const std::string& key, double& out) {
    if (auto* v = take(key)) {
      if (auto* d = std::get_if<double>(&v->v)) out = *d;
      else if (auto* i = std::get_if<std::int64_t>(&v->v)) out = double(*i);
      else fail("'" + key + "' must be a number");
    }
  }
  template <class Int>
    requires std::is_integral_v<Int>
  void get(const std::string& key, Int& out) {
    if (auto* v = take(key)) {
      auto* i = std::get_if<std::int64_t>(&v->v);
      if (!i) fail("'" + key + "' must be an integer");
      if (std::is_unsigned_v<Int> && *i < 0) fail("'" + key + "' must be non-negative");
      out = static_cast<Int>(*i);
    }
  }
  void get(const std::string& key, bool& out) {
    if (auto* v = take(key)) {
      auto* b = std::get_if<bool>(&v->v);
      if (!b) fail("'" + key + "' must be true or false");
      out = *b;
    }
  }
  void get(const std::string& key, std::string& out) {
    if (auto* v = take(key)) {
      auto* s = std::get_if<std::string>(&v->v);
      if (!s) fail("'" + key + "' must be a string");
      out = *s;
    }
  }
  void get(const std::string& key, std::vector<std::string>& out) {
    if (auto* v = take(key)) {
      auto* a = std::get_if<TomlArray>(&v->v);
      if (!a) fail("'" + key + "' must be an array of strings");
      out.clear();
      for (const auto& e : *a) {
        auto* s = std::get_if<std::string>(&e.v);
        if (!s) fail("'" + key + "' must be an array of strings");
        out.push_back(*s);
      }
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (auto* v = take(key)) {
      auto* a = std::get_if<TomlArray>(&v->v);
      if (!a) fail("'" + key + "' must be an array of integers");
      out.clear();
      for (const auto& e : *a) {
        auto* i = std::get_if<std::int64_t>(&e.v);
        if (!i) fail("'" + key + "' must be an array of integers");
        out.push_back(int(*i));
      }
    }
  }
  template <class Enum>
  void get_enum(const std::string& key, Enum& out, Enum (*parse)(const std::string&)) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    try {
      out = parse(s);
    } catch (const Error& e) {
      fail("'" + key + "': " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : doc_) {
      if (!taken_.count(k)) fail("unknown config key '" + k + "'");
    }
  }

 private:
  TomlDocument doc_;
  std::set<std::string> taken_;
};

}  // namespace

TomlDocument parse_toml(const std::string& text) { return TomlParser(text).parse(); }

PipelineConfig PipelineConfig::defaults() { return PipelineConfig{}; }

void PipelineConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(msg);
  };
  check(noise >= 0.0 && noise <= 1.0, "run.noise must lie in [0, 1]");
  check(!out_dir.empty(), "run.out_dir must not be empty");
  for (const auto& f : formats)
    check(f == "json" || f == "csv" || f == "plot-data", "unknown report format '" + f + "'");
  check(threads >= 0, "run.threads must be >= 0");
  if (!input.empty()) check(std::filesystem::exists(input), "input file '" + input + "' does not exist");
  check(nt == 0 || nt >= 8, "simulate.nt must be 0 or >= 8");
  check(nx == 0 || nx >= 8, "simulate.nx must be 0 or >= 8");
  check(ny == 0 || ny >= 8, "simulate.ny must be 0 or >= 8");
  check(ny == 0 || system == SystemKind::burgers2d, "simulate.ny only applies to burgers2d");
  check(solver_refine >= 0, "simulate.solver_refine must be >= 0");
  check(diff.stencil_order == 2 || diff.stencil_order == 4, "featlib.stencil_order must be 2 or 4");
  check(diff.poly_window > diff.poly_degree && diff.poly_window % 2 == 1,
        "featlib.poly_window must be odd and exceed poly_degree");
  check(library.max_poly_power >= 0 && library.max_poly_power <= 5, "featlib.max_poly_power must lie in [0, 5]");
  check(library.max_deriv_order >= 0 && library.max_deriv_order <= 3, "featlib.max_deriv_order must lie in [0, 3]");
  check(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0, "fft.cutoff_fraction must lie in (0, 1]");
  check(ic_source == "auto" || ic_source == "analytic" || ic_source == "from_data",
        "refine.ic_source must be auto, analytic or from_data");
  check(loss_target == "auto" || loss_target == "raw" || loss_target == "denoised",
        "refine.loss_target must be auto, raw or denoised");
  try {
    denoise.validate();
    select.validate();
    refine.validate();
    stridge.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

PipelineConfig config_from_toml(const std::string& text) {
  PipelineConfig c = PipelineConfig::defaults();
  Binder b(parse_toml(text));

  b.get_enum("run.system", c.system, parse_system);
  b.get("run.seed", c.seed);
  b.get("run.noise", c.noise);
  b.get("run.input", c.input);
  b.get("run.out_dir", c.out_dir);
  b.get("run.formats", c.formats);
  b.get("run.threads", c.threads);

  b.get("simulate.nt", c.nt);
  b.get("simulate.nx", c.nx);
  b.get("simulate.ny", c.ny);
  b.get("simulate.solver_refine", c.solver_refine);

  b.get("denoise.enabled", c.denoise_enabled);
  b.get("denoise.split_fraction", c.denoise.split_fraction);
  b.get("denoise.patience", c.denoise.patience);
  b.get("denoise.max_epochs", c.denoise.max_epochs);
  b.get("denoise.learning_rate", c.denoise.learning_rate);
  b.get("denoise.batch_size", c.denoise.batch_size);
  b.get("denoise.momentum", c.denoise.momentum);
  b.get_enum("denoise.optimizer", c.denoise.optimizer, parse_optimizer);
  b.get("denoise.lr_decay", c.denoise.lr_decay);
  b.get("denoise.decay_patience", c.denoise.decay_patience);
  b.get("denoise.hidden", c.denoise.hidden);

  b.get_enum("featlib.scheme", c.diff.scheme, parse_scheme);
  b.get("featlib.stencil_order", c.diff.stencil_order);
  b.get("featlib.poly_degree", c.diff.poly_degree);
  b.get("featlib.poly_window", c.diff.poly_window);
  b.get("featlib.max_poly_power", c.library.max_poly_power);
  b.get("featlib.max_deriv_order", c.library.max_deriv_order);
  b.get("featlib.grouped_2d", c.library.grouped_2d);
  b.get("featlib.terms", c.library.terms);

  b.get("fft.enabled", c.fft_enabled);
  b.get("fft.cutoff_fraction", c.cutoff_fraction);

  b.get("select.n_val", c.select.n_val);
  b.get("select.split", c.select.split);
  b.get("select.gamma_reg", c.select.gamma_reg);
  b.get("select.gamma_bic", c.select.gamma_bic);
  b.get("select.branch_tolerance", c.select.branch_tolerance);
  b.get("select.max_terms", c.select.max_terms);
  b.get("select.max_branches", c.select.max_branches);
  b.get_enum("select.stop_rule", c.select.stop_rule, parse_stop_rule);

  b.get("refine.enabled", c.refine_enabled);
  b.get("refine.max_iters", c.refine.max_iters);
  b.get("refine.initial_step", c.refine.initial_step);
  b.get("refine.shrink", c.refine.shrink);
  b.get("refine.armijo", c.refine.armijo);
  b.get("refine.max_backtracks", c.refine.max_backtracks);
  b.get("refine.fd_step", c.refine.fd_step);
  b.get("refine.tol", c.refine.tol);
  b.get("refine.tie_tolerance", c.refine.tie_tolerance);
  b.get("refine.prune_fraction", c.refine.prune_fraction);
  b.get("refine.max_free", c.refine.max_free);
  b.get("refine.max_substeps", c.refine.max_substeps);
  b.get("refine.ic_source", c.ic_source);
  b.get("refine.loss_target", c.loss_target);

  b.get("stridge.lambda", c.stridge.lambda);
  b.get("stridge.d_tol", c.stridge.d_tol);
  b.get("stridge.max_iters", c.stridge.max_iters);
  b.get("stridge.tol_iters", c.stridge.tol_iters);
  b.get("stridge.split", c.stridge.split);
  b.get("stridge.l0_penalty", c.stridge.l0_penalty);

  b.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_toml(ss.str());
}

std::string default_config_toml() {
  const PipelineConfig c = PipelineConfig::defaults();
  std::ostringstream o;
  o.precision(17);
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(15);
    s << v;
    std::string r = s.str();
    if (r.find_first_of(".eEn") == std::string::npos) r += ".0";
    return r;
  };
  auto list = [](const auto& v, bool quoted) {
    std::string r = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) r += ", ";
      std::ostringstream s;
      if (quoted) s << '"' << v[i] << '"';
      else s << v[i];
      r += s.str();
    }
    return r + "]";
  };
  auto b = [](bool v) { return v ? "true" : "false"; };

  o << "[run]\n"
    << "system = \"" << to_string(c.system) << "\"      # burgers1d | kdv | burgers2d\n"
    << "seed = " << c.seed << "                  # root seed; simulate.noise, denoise.init and select.splits derive from it\n"
    << "noise = " << num(c.noise) << "               # noise level as a fraction of std(u)\n"
    << "input = \"\"                  # measured field (.psig); when set the simulate stage is skipped\n"
    << "out_dir = \"" << c.out_dir << "\"\n"
    << "formats = " << list(c.formats, true) << "\n"
    << "threads = " << c.threads << "                 # 0: PSI_PDE_THREADS or hardware concurrency\n\n";

  o << "[simulate]\n"
    << "nt = 0                      # grid overrides; 0 keeps the system default\n"
    << "nx = 0\n"
    << "ny = 0\n"
    << "solver_refine = 0           # internal spatial refinement; 0 keeps the system default\n\n";

  o << "[denoise]\n"
    << "enabled = " << b(c.denoise_enabled) << "\n"
    << "optimizer = \"" << to_string(c.denoise.optimizer) << "\"        # adam | momentum\n"
    << "learning_rate = " << num(c.denoise.learning_rate) << "\n"
    << "batch_size = " << c.denoise.batch_size << "            # 0: full batch\n"
    << "momentum = " << num(c.denoise.momentum) << "              # momentum optimizer only\n"
    << "max_epochs = " << c.denoise.max_epochs << "\n"
    << "patience = " << c.denoise.patience << "               # epochs without validation improvement before stopping\n"
    << "lr_decay = " << num(c.denoise.lr_decay) << "\n"
    << "decay_patience = " << c.denoise.decay_patience << "         # epochs without improvement before decaying the rate\n"
    << "split_fraction = " << num(c.denoise.split_fraction) << "\n"
    << "hidden = " << list(c.denoise.hidden, false) << "\n\n";

  o << "[featlib]\n"
    << "scheme = \"" << to_string(c.diff.scheme) << "\"       # central_fd | poly_interp\n"
    << "stencil_order = " << c.diff.stencil_order << "           # 2 or 4\n"
    << "poly_degree = " << c.diff.poly_degree << "\n"
    << "poly_window = " << c.diff.poly_window << "\n"
    << "max_poly_power = " << c.library.max_poly_power << "\n"
    << "max_deriv_order = " << c.library.max_deriv_order << "         # 0: 3 for 1D systems, 2 for burgers2d\n"
    << "grouped_2d = " << b(c.library.grouped_2d) << "\n"
    << "terms = []                  # explicit term labels, e.g. [\"u*u_x\", \"u_xx\"]\n\n";

  o << "[fft]\n"
    << "enabled = " << b(c.fft_enabled) << "\n"
    << "cutoff_fraction = " << num(c.cutoff_fraction) << "       # kept fraction of modes per axis\n\n";

  o << "[select]\n"
    << "n_val = " << c.select.n_val << "                 # random splits per screening round\n"
    << "split = " << num(c.select.split) << "                 # training fraction\n"
    << "gamma_reg = " << num(c.select.gamma_reg) << "\n"
    << "gamma_bic = " << num(c.select.gamma_bic) << "\n"
    << "stop_rule = \"" << to_string(c.select.stop_rule) << "\"        # either | both\n"
    << "branch_tolerance = " << num(c.select.branch_tolerance) << "\n"
    << "max_terms = " << c.select.max_terms << "\n"
    << "max_branches = " << c.select.max_branches << "\n\n";

  o << "[refine]\n"
    << "enabled = " << b(c.refine_enabled) << "\n"
    << "ic_source = \"" << c.ic_source << "\"          # auto | analytic | from_data\n"
    << "loss_target = \"" << c.loss_target << "\"        # auto | raw | denoised\n"
    << "max_iters = " << c.refine.max_iters << "\n"
    << "initial_step = " << num(c.refine.initial_step) << "         # relative coefficient change tried first\n"
    << "shrink = " << num(c.refine.shrink) << "\n"
    << "armijo = " << num(c.refine.armijo) << "\n"
    << "max_backtracks = " << c.refine.max_backtracks << "\n"
    << "fd_step = " << num(c.refine.fd_step) << "\n"
    << "tol = " << num(c.refine.tol) << "\n"
    << "tie_tolerance = " << num(c.refine.tie_tolerance) << "       # relative loss gap treated as a tie\n"
    << "prune_fraction = " << num(c.refine.prune_fraction) << "\n"
    << "max_free = " << c.refine.max_free << "\n"
    << "max_substeps = " << c.refine.max_substeps << "\n\n";

  o << "[stridge]\n"
    << "lambda = " << num(c.stridge.lambda) << "\n"
    << "d_tol = " << num(c.stridge.d_tol) << "\n"
    << "max_iters = " << c.stridge.max_iters << "\n"
    << "tol_iters = " << c.stridge.tol_iters << "\n"
    << "split = " << num(c.stridge.split) << "\n"
    << "l0_penalty = " << num(c.stridge.l0_penalty) << "          # negative: 0.001 * cond(theta)\n";
  return o.str();
}

}  // namespace psipde
