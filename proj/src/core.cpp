#include "psipde/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace psipde {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::empty_field: return "empty field";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::truncated_payload: return "truncated payload";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::io_failure: return "io failure";
    case ErrorCode::unstable_configuration: return "unstable configuration";
    case ErrorCode::candidate_unstable: return "candidate unstable";
    case ErrorCode::training_diverged: return "training diverged; lower learning rate";
    case ErrorCode::degenerate_target: return "degenerate target";
    case ErrorCode::cannot_reshape: return "cannot reshape for FFT";
    case ErrorCode::unknown_term: return "unknown term";
    case ErrorCode::no_viable_candidate: return "no viable candidate";
    case ErrorCode::config_error: return "config error";
  }
  return "unknown error";
}

std::vector<double> Axis::nodes() const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = at(i);
  return out;
}

namespace {

void validate_axis(const Axis& a, const char* name) {
  if (a.n < 8) {
    throw Error(ErrorCode::invalid_argument, std::string("axis ") + name + " needs at least 8 samples");
  }
  if (!(a.max > a.min) || !std::isfinite(a.min) || !std::isfinite(a.max)) {
    throw Error(ErrorCode::invalid_argument, std::string("axis ") + name + " requires max > min");
  }
}

}  // namespace

void Grid::validate() const {
  validate_axis(t, "t");
  validate_axis(x, "x");
  if (y) validate_axis(*y, "y");
}

Grid Grid::make_1d(Axis t, Axis x) {
  Grid g{t, x, std::nullopt};
  g.validate();
  return g;
}

Grid Grid::make_2d(Axis t, Axis x, Axis y) {
  Grid g{t, x, y};
  g.validate();
  return g;
}

FieldTensor::FieldTensor(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  grid_.validate();
  if (values_.size() != grid_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "field values do not match grid shape");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "field contains non-finite values");
  }
}

FieldStats field_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_field, "empty field");
  const double count = static_cast<double>(values.size());
  double sum = 0.0;
  double lo = values.front();
  double hi = values.front();
  for (double v : values) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double mean = sum / count;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / count), lo, hi};
}

// ---------------------------------------------------------------------------
// Term labels

namespace {

std::string deriv_suffix(char axis, int order) { return std::string(static_cast<std::size_t>(order), axis); }

std::string derivative_label(const TermSpec& t) {
  if (t.grouped) {
    return "(u_" + deriv_suffix('x', t.deriv_x) + "+u_" + deriv_suffix('y', t.deriv_x) + ")";
  }
  return "u_" + deriv_suffix('x', t.deriv_x) + deriv_suffix('y', t.deriv_y);
}

std::string power_label(int p) {
  if (p == 0) return "";
  if (p == 1) return "u";
  return "u^" + std::to_string(p);
}

[[noreturn]] void bad_label(const std::string& label) {
  throw Error(ErrorCode::unknown_term, "unknown term '" + label + "'");
}

// Parses "u_xxy" style derivative; returns false if not a derivative token.
bool parse_derivative(const std::string& s, int& dx, int& dy) {
  if (s.size() < 3 || s.compare(0, 2, "u_") != 0) return false;
  dx = dy = 0;
  bool seen_y = false;
  for (std::size_t i = 2; i < s.size(); ++i) {
    if (s[i] == 'x' && !seen_y) {
      ++dx;
    } else if (s[i] == 'y') {
      seen_y = true;
      ++dy;
    } else {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string TermSpec::label() const {
  if (!has_derivative()) return poly_power == 0 ? "1" : power_label(poly_power);
  if (poly_power == 0) return derivative_label(*this);
  return power_label(poly_power) + "*" + derivative_label(*this);
}

TermSpec parse_term(const std::string& label) {
  TermSpec t;
  if (label == "1") return t;
  std::string rest = label;
  std::string power_part;
  std::string deriv_part;
  const auto star = rest.find('*');
  if (star != std::string::npos) {
    power_part = rest.substr(0, star);
    deriv_part = rest.substr(star + 1);
    if (power_part.empty() || deriv_part.empty()) bad_label(label);
  } else if (rest.rfind("u_", 0) == 0 || rest.rfind("(u_", 0) == 0) {
    deriv_part = rest;
  } else {
    power_part = rest;
  }
  if (!power_part.empty()) {
    if (power_part == "u") {
      t.poly_power = 1;
    } else if (power_part.size() == 3 && power_part.compare(0, 2, "u^") == 0 && power_part[2] >= '2' &&
               power_part[2] <= '9') {
      t.poly_power = power_part[2] - '0';
    } else {
      bad_label(label);
    }
  }
  if (!deriv_part.empty()) {
    if (deriv_part.front() == '(') {
      const auto plus = deriv_part.find('+');
      if (deriv_part.back() != ')' || plus == std::string::npos) bad_label(label);
      int ax = 0, ay = 0, bx = 0, by = 0;
      if (!parse_derivative(deriv_part.substr(1, plus - 1), ax, ay) ||
          !parse_derivative(deriv_part.substr(plus + 1, deriv_part.size() - plus - 2), bx, by) || ay != 0 ||
          bx != 0 || ax != by || ax == 0) {
        bad_label(label);
      }
      t.grouped = true;
      t.deriv_x = ax;
      t.deriv_y = by;
    } else {
      if (!parse_derivative(deriv_part, t.deriv_x, t.deriv_y)) bad_label(label);
    }
  }
  if (t.label() != label) bad_label(label);
  return t;
}

const char* to_string(EquationOrigin origin) {
  switch (origin) {
    case EquationOrigin::selection: return "selection";
    case EquationOrigin::branch: return "branch";
    case EquationOrigin::refined: return "refined";
  }
  return "?";
}

void CandidateEquation::validate() const {
  if (terms.empty() || support.empty()) throw Error(ErrorCode::invalid_argument, "equation support is empty");
  if (support.size() != terms.size()) throw Error(ErrorCode::invalid_argument, "equation support indices repeat");
  for (const auto& wt : terms) {
    if (!std::isfinite(wt.coefficient)) throw Error(ErrorCode::invalid_argument, "non-finite coefficient");
  }
}

CandidateEquation make_equation(std::vector<WeightedTerm> terms, EquationOrigin origin) {
  CandidateEquation eq;
  eq.origin = origin;
  std::sort(terms.begin(), terms.end(),
            [](const WeightedTerm& a, const WeightedTerm& b) { return a.term.index < b.term.index; });
  for (const auto& wt : terms) eq.support.insert(wt.term.index);
  eq.terms = std::move(terms);
  eq.validate();
  return eq;
}

std::string CandidateEquation::to_string(int precision) const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << "u_t =";
  bool first = true;
  for (const auto& wt : terms) {
    const double c = wt.coefficient;
    if (first) {
      os << (c < 0 ? " -" : " ");
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    os << std::abs(c) << wt.term.label();
    first = false;
  }
  return os.str();
}

const char* to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::burgers1d: return "burgers1d";
    case SystemKind::kdv: return "kdv";
    case SystemKind::burgers2d: return "burgers2d";
  }
  return "?";
}

SystemKind parse_system(const std::string& name) {
  if (name == "burgers1d") return SystemKind::burgers1d;
  if (name == "kdv") return SystemKind::kdv;
  if (name == "burgers2d") return SystemKind::burgers2d;
  throw Error(ErrorCode::invalid_argument, "unknown system '" + name + "'");
}

double SimSpec::coefficient(const std::string& name) const {
  const auto it = coefficients.find(name);
  if (it == coefficients.end()) {
    throw Error(ErrorCode::invalid_argument, std::string(to_string(system)) + " requires coefficient '" + name + "'");
  }
  return it->second;
}

void SimSpec::validate() const {
  grid.validate();
  for (const auto& [name, v] : coefficients) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "coefficient '" + name + "' is not finite");
  }
  switch (system) {
    case SystemKind::burgers1d:
      if (coefficient("nu") <= 0.0) throw Error(ErrorCode::invalid_argument, "burgers1d requires nu > 0");
      if (grid.y) throw Error(ErrorCode::invalid_argument, "burgers1d requires a 1D grid");
      break;
    case SystemKind::kdv:
      coefficient("lambda1");
      coefficient("lambda2");
      if (grid.y) throw Error(ErrorCode::invalid_argument, "kdv requires a 1D grid");
      break;
    case SystemKind::burgers2d:
      coefficient("advection");
      coefficient("diffusion");
      if (!grid.y) throw Error(ErrorCode::invalid_argument, "burgers2d requires a 2D grid");
      break;
  }
}

SimSpec SimSpec::defaults(SystemKind kind) {
  SimSpec s;
  s.system = kind;
  switch (kind) {
    case SystemKind::burgers1d:
      s.coefficients = {{"nu", 0.01 / std::numbers::pi}};
      s.grid = Grid::make_1d({0.0, 1.0, 101}, {-1.0, 1.0, 256});
      break;
    case SystemKind::kdv:
      s.coefficients = {{"lambda1", -1.0}, {"lambda2", -0.0025}};
      s.grid = Grid::make_1d({0.0, 1.0, 201}, {-1.0, 1.0 - 2.0 / 256.0, 256});
      break;
    case SystemKind::burgers2d:
      s.coefficients = {{"advection", -1.0}, {"diffusion", 0.01}};
      s.grid = Grid::make_2d({0.0, 2.0, 51}, {-1.0, 1.0 - 2.0 / 64.0, 64}, {-1.0, 1.0 - 2.0 / 64.0, 64});
      break;
  }
  return s;
}

}  // namespace psipde
