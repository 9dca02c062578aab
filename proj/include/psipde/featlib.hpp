#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "psipde/core.hpp"
#include "psipde/linalg.hpp"

namespace psipde {

enum class DiffScheme { central_fd, poly_interp };
const char* to_string(DiffScheme s);
DiffScheme parse_scheme(const std::string& name);

struct DiffOptions {
  DiffScheme scheme = DiffScheme::central_fd;
  int stencil_order = 4;  // central_fd accuracy (2 or 4)
  int poly_degree = 4;    // poly_interp
  int poly_window = 9;    // poly_interp
  int max_order = 3;      // highest spatial derivative computed per axis
};

// Numerical derivatives of a field on its own grid. Values next to the edges
// come from shifted stencils; `trim_*` give the band widths that downstream
// regression excludes.
struct DerivativeStack {
  Grid grid;
  DiffScheme scheme = DiffScheme::central_fd;
  int stencil_order = 4;
  std::vector<double> u_t;
  // keyed by (order in x, order in y); pure derivatives only
  std::map<std::pair<int, int>, std::vector<double>> spatial;
  std::size_t trim_t = 0;
  std::size_t trim_x = 0;
  std::size_t trim_y = 0;

  const std::vector<double>& derivative(int dx, int dy) const;
};

DerivativeStack differentiate(const FieldTensor& f, const DiffOptions& opts = {});

struct LibrarySpec {
  int max_poly_power = 3;
  int max_deriv_order = 3;
  // 2D only: group (u_x+u_y), (u_xx+u_yy), ... into single columns.
  bool grouped_2d = true;
  // Explicit term labels; overrides the generated ordering when non-empty.
  std::vector<std::string> terms;
};

// Kept rows form the rectangular block [t0, t0+nt) x [x0, x0+nx) x [y0, y0+ny).
struct RowBlock {
  std::size_t t0 = 0, nt = 0;
  std::size_t x0 = 0, nx = 0;
  std::size_t y0 = 0, ny = 1;

  std::size_t size() const { return nt * nx * ny; }
};

struct LibraryMatrix {
  Eigen::MatrixXd columns;
  std::vector<TermSpec> terms;
  RowBlock rows;
  std::vector<double> column_norms;
};

struct Library {
  LibraryMatrix matrix;
  Eigen::VectorXd target;  // u_t over the kept rows

  RegressionSystem system() const { return {matrix.columns, target, matrix.terms, 1}; }
};

// Complexity-ascending term list: derivative order outermost, then power of u.
std::vector<TermSpec> library_terms(const LibrarySpec& spec, int spatial_dims);

// Evaluates one term from u and its derivative stack at every grid node.
std::vector<double> evaluate_term(const TermSpec& term, std::span<const double> u, const DerivativeStack& d);

Library build_library(const FieldTensor& u, const DerivativeStack& d, const LibrarySpec& spec = {});
Library build_library_2d(const FieldTensor& u, const DerivativeStack& d, const LibrarySpec& spec = {});

}  // namespace psipde
