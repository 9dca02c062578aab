#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psipde {

enum class ErrorCode {
  invalid_argument,
  empty_field,
  bad_magic,
  truncated_payload,
  dimension_mismatch,
  io_failure,
  unstable_configuration,
  candidate_unstable,
  training_diverged,
  degenerate_target,
  cannot_reshape,
  unknown_term,
  no_viable_candidate,
  config_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Uniformly sampled coordinate axis, both end points included.
struct Axis {
  double min = 0.0;
  double max = 1.0;
  std::size_t n = 0;

  double spacing() const { return (max - min) / static_cast<double>(n - 1); }
  double at(std::size_t i) const { return min + spacing() * static_cast<double>(i); }
  std::vector<double> nodes() const;
  bool operator==(const Axis&) const = default;
};

// Regular space-time grid. Periodic problems store the left end point and
// omit the right one, so the period is n * spacing.
struct Grid {
  Axis t;
  Axis x;
  std::optional<Axis> y;

  int spatial_dims() const { return y ? 2 : 1; }
  std::size_t nx() const { return x.n; }
  std::size_t ny() const { return y ? y->n : 1; }
  std::size_t nt() const { return t.n; }
  std::size_t slice_size() const { return nx() * ny(); }
  std::size_t size() const { return nt() * slice_size(); }

  // Throws on violated invariants (n >= 8, max > min).
  void validate() const;
  bool operator==(const Grid&) const = default;

  static Grid make_1d(Axis t, Axis x);
  static Grid make_2d(Axis t, Axis x, Axis y);
};

// Sampled solution on a Grid, time-major: index = (it * nx + ix) * ny + iy.
class FieldTensor {
 public:
  FieldTensor(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double operator()(std::size_t it, std::size_t ix, std::size_t iy = 0) const {
    return values_[index(it, ix, iy)];
  }
  std::size_t index(std::size_t it, std::size_t ix, std::size_t iy = 0) const {
    return (it * grid_.nx() + ix) * grid_.ny() + iy;
  }
  std::span<const double> slice(std::size_t it) const {
    return std::span<const double>(values_).subspan(it * grid_.slice_size(), grid_.slice_size());
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct FieldStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Population statistics over every entry.
FieldStats field_stats(std::span<const double> values);
inline FieldStats field_stats(const FieldTensor& f) { return field_stats(f.values()); }

// One candidate right-hand-side term: u^poly_power times a spatial derivative.
// A zero-order derivative means the term is just u^poly_power. When `grouped`
// is set the derivative is the sum over both axes of the same order, e.g.
// (u_x+u_y) or (u_xx+u_yy).
struct TermSpec {
  int poly_power = 0;
  int deriv_x = 0;
  int deriv_y = 0;
  bool grouped = false;
  int index = 0;  // 1-based position in the library

  int deriv_order() const { return grouped ? deriv_x : deriv_x + deriv_y; }
  bool has_derivative() const { return deriv_x > 0 || deriv_y > 0; }
  std::string label() const;
  bool same_shape(const TermSpec& o) const {
    return poly_power == o.poly_power && deriv_x == o.deriv_x && deriv_y == o.deriv_y &&
           grouped == o.grouped;
  }
};

// Parses a canonical label such as "u^2*u_xx" or "u*(u_x+u_y)". Index is left 0.
TermSpec parse_term(const std::string& label);

enum class EquationOrigin { selection, branch, refined };
const char* to_string(EquationOrigin origin);

struct WeightedTerm {
  TermSpec term;
  double coefficient = 0.0;
};

struct CandidateEquation {
  std::vector<WeightedTerm> terms;
  std::set<int> support;
  double fit_rms = 0.0;
  EquationOrigin origin = EquationOrigin::selection;

  void validate() const;
  std::string to_string(int precision = 4) const;
};

CandidateEquation make_equation(std::vector<WeightedTerm> terms, EquationOrigin origin);

enum class SystemKind { burgers1d, kdv, burgers2d };
const char* to_string(SystemKind kind);
SystemKind parse_system(const std::string& name);

struct SimSpec {
  SystemKind system = SystemKind::burgers1d;
  std::map<std::string, double> coefficients;
  Grid grid;
  // Internal spatial refinement factor of the solver relative to the stored grid.
  int refine_factor = 0;  // 0: system default

  void validate() const;
  double coefficient(const std::string& name) const;

  static SimSpec defaults(SystemKind kind);
};

}  // namespace psipde
