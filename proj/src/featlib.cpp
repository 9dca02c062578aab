#include "psipde/featlib.hpp"

#include <algorithm>
#include <cmath>

#include "psipde/stencil.hpp"

namespace psipde {

const char* to_string(DiffScheme s) { return s == DiffScheme::central_fd ? "central_fd" : "poly_interp"; }

DiffScheme parse_scheme(const std::string& name) {
  if (name == "central_fd") return DiffScheme::central_fd;
  if (name == "poly_interp") return DiffScheme::poly_interp;
  throw Error(ErrorCode::invalid_argument, "unknown differentiation scheme '" + name + "'");
}

const std::vector<double>& DerivativeStack::derivative(int dx, int dy) const {
  const auto it = spatial.find({dx, dy});
  if (it == spatial.end()) {
    throw Error(ErrorCode::unknown_term, "derivative of order (" + std::to_string(dx) + "," + std::to_string(dy) +
                                             ") was not computed");
  }
  return it->second;
}

namespace {

LineDerivative make_op(const DiffOptions& o, int order, std::size_t n, double h) {
  if (o.scheme == DiffScheme::central_fd) {
    return LineDerivative(LineDerivative::Kind::central_fd, order, o.stencil_order, n, h);
  }
  return LineDerivative(LineDerivative::Kind::poly_interp, order, o.poly_degree, n, h, o.poly_window);
}

}  // namespace

DerivativeStack differentiate(const FieldTensor& f, const DiffOptions& opts) {
  const Grid& g = f.grid();
  DerivativeStack d;
  d.grid = g;
  d.scheme = opts.scheme;
  d.stencil_order = opts.stencil_order;
  const std::size_t nt = g.nt(), nx = g.nx(), ny = g.ny();
  const auto vals = f.values();

  const LineDerivative dt_op = make_op(opts, 1, nt, g.t.spacing());
  d.trim_t = dt_op.half_width();
  d.u_t.resize(f.size());
  // stride between consecutive time samples is the slice size
  for (std::size_t s = 0; s < nx * ny; ++s) dt_op.apply(vals.data() + s, d.u_t.data() + s, nx * ny);

  for (int k = 1; k <= opts.max_order; ++k) {
    const LineDerivative op = make_op(opts, k, nx, g.x.spacing());
    d.trim_x = std::max(d.trim_x, op.half_width());
    auto& out = d.spatial[{k, 0}];
    out.resize(f.size());
    for (std::size_t it = 0; it < nt; ++it) {
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const std::size_t base = it * nx * ny + iy;
        op.apply(vals.data() + base, out.data() + base, ny);
      }
    }
  }
  if (g.y) {
    for (int k = 1; k <= opts.max_order; ++k) {
      const LineDerivative op = make_op(opts, k, ny, g.y->spacing());
      d.trim_y = std::max(d.trim_y, op.half_width());
      auto& out = d.spatial[{0, k}];
      out.resize(f.size());
      for (std::size_t it = 0; it < nt; ++it) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
          const std::size_t base = (it * nx + ix) * ny;
          op.apply(vals.data() + base, out.data() + base, 1);
        }
      }
    }
  }
  return d;
}

std::vector<TermSpec> library_terms(const LibrarySpec& spec, int spatial_dims) {
  std::vector<TermSpec> terms;
  if (!spec.terms.empty()) {
    for (const auto& label : spec.terms) terms.push_back(parse_term(label));
  } else {
    if (spec.max_poly_power < 0 || spec.max_deriv_order < 0) {
      throw Error(ErrorCode::invalid_argument, "library orders must be non-negative");
    }
    for (int d = 0; d <= spec.max_deriv_order; ++d) {
      if (d == 0 || spatial_dims == 1) {
        for (int p = 0; p <= spec.max_poly_power; ++p) terms.push_back({p, d, 0, false, 0});
      } else if (spec.grouped_2d) {
        for (int p = 0; p <= spec.max_poly_power; ++p) terms.push_back({p, d, d, true, 0});
      } else {
        for (int p = 0; p <= spec.max_poly_power; ++p) terms.push_back({p, d, 0, false, 0});
        for (int p = 0; p <= spec.max_poly_power; ++p) terms.push_back({p, 0, d, false, 0});
      }
    }
  }
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    if (spatial_dims == 1 && (t.deriv_y != 0 || t.grouped)) {
      throw Error(ErrorCode::unknown_term, "unknown term '" + t.label() + "' for 1D data");
    }
    if (t.deriv_x > 0 && t.deriv_y > 0 && !t.grouped) {
      throw Error(ErrorCode::unknown_term, "mixed derivative '" + t.label() + "' is not supported");
    }
    terms[i].index = static_cast<int>(i) + 1;
  }
  return terms;
}

std::vector<double> evaluate_term(const TermSpec& term, std::span<const double> u, const DerivativeStack& d) {
  std::vector<double> col(u.size());
  const std::vector<double>* a = nullptr;
  const std::vector<double>* b = nullptr;
  if (term.grouped) {
    a = &d.derivative(term.deriv_x, 0);
    b = &d.derivative(0, term.deriv_x);
  } else if (term.has_derivative()) {
    a = &d.derivative(term.deriv_x, term.deriv_y);
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    double v = 1.0;
    for (int k = 0; k < term.poly_power; ++k) v *= u[i];
    if (a) v *= b ? ((*a)[i] + (*b)[i]) : (*a)[i];
    col[i] = v;
  }
  return col;
}

namespace {

Library assemble(const FieldTensor& u, const DerivativeStack& d, std::vector<TermSpec> terms) {
  const Grid& g = u.grid();
  if (!(d.grid == g) || d.u_t.size() != u.size()) {
    throw Error(ErrorCode::dimension_mismatch, "derivative stack does not match field");
  }
  RowBlock rb;
  rb.t0 = d.trim_t;
  rb.x0 = d.trim_x;
  rb.y0 = g.y ? d.trim_y : 0;
  if (g.nt() <= 2 * rb.t0 || g.nx() <= 2 * rb.x0 || g.ny() <= 2 * rb.y0) {
    throw Error(ErrorCode::invalid_argument, "grid too small for stencil");
  }
  rb.nt = g.nt() - 2 * rb.t0;
  rb.nx = g.nx() - 2 * rb.x0;
  rb.ny = g.y ? g.ny() - 2 * rb.y0 : 1;

  std::vector<std::size_t> rows;
  rows.reserve(rb.size());
  for (std::size_t it = 0; it < rb.nt; ++it) {
    for (std::size_t ix = 0; ix < rb.nx; ++ix) {
      for (std::size_t iy = 0; iy < rb.ny; ++iy) rows.push_back(u.index(rb.t0 + it, rb.x0 + ix, rb.y0 + iy));
    }
  }
  Library lib;
  lib.matrix.rows = rb;
  const auto m = static_cast<Eigen::Index>(rows.size());
  lib.matrix.columns.resize(m, static_cast<Eigen::Index>(terms.size()));
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const std::vector<double> col = evaluate_term(terms[j], u.values(), d);
    for (Eigen::Index r = 0; r < m; ++r) lib.matrix.columns(r, Eigen::Index(j)) = col[rows[std::size_t(r)]];
    lib.matrix.column_norms.push_back(lib.matrix.columns.col(Eigen::Index(j)).norm());
  }
  lib.target.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) lib.target(r) = d.u_t[rows[std::size_t(r)]];
  for (Eigen::Index r = 0; r < m; ++r) {
    if (!lib.matrix.columns.row(r).allFinite() || !std::isfinite(lib.target(r))) {
      throw Error(ErrorCode::invalid_argument, "non-finite library row");
    }
  }
  lib.matrix.terms = std::move(terms);
  return lib;
}

}  // namespace

Library build_library(const FieldTensor& u, const DerivativeStack& d, const LibrarySpec& spec) {
  return assemble(u, d, library_terms(spec, u.grid().spatial_dims()));
}

Library build_library_2d(const FieldTensor& u, const DerivativeStack& d, const LibrarySpec& spec) {
  if (!u.grid().y) throw Error(ErrorCode::dimension_mismatch, "build_library_2d requires a 2D field");
  return assemble(u, d, library_terms(spec, 2));
}

}  // namespace psipde
