#include "psipde/pde_solver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "psipde/fftw_lock.hpp"
#include "psipde/stencil.hpp"

namespace psipde {

namespace {

using cplx = std::complex<double>;

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(x));
  }
  return m;
}

double ipow(double u, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= u;
  return r;
}

void check_blowup(std::span<const double> u, double threshold) {
  if (!(max_abs(u) <= threshold)) throw Error(ErrorCode::candidate_unstable, "candidate unstable");
}

std::size_t substeps_for(double interval, double dt_max, int min_sub) {
  if (!(dt_max > 0.0)) return std::numeric_limits<std::size_t>::max();
  const double n = std::ceil(interval / dt_max - 1e-12);
  if (!std::isfinite(n) || n > 1e12) return std::numeric_limits<std::size_t>::max();
  return std::max<std::size_t>(static_cast<std::size_t>(std::max(n, 1.0)), static_cast<std::size_t>(min_sub));
}

// RK4 stability reaches about 2.78 on the negative real axis and 2.83 on the
// imaginary axis; 2.5 covers mixed spectra.
constexpr double kRk4Radius = 2.5;

// ---------------------------------------------------------------------------
// Dirichlet, 1D, finite differences

class DirichletSolver {
 public:
  DirichletSolver(std::span<const WeightedTerm> rhs, const Grid& grid, const SolverOptions& opts)
      : rhs_(rhs.begin(), rhs.end()), grid_(grid), opts_(opts) {
    r_ = static_cast<std::size_t>(std::max(1, opts.refine_factor));
    n_ = (grid.nx() - 1) * r_ + 1;
    h_ = grid.x.spacing() / static_cast<double>(r_);
    for (const auto& wt : rhs_) {
      if (wt.term.deriv_y != 0 || wt.term.grouped) {
        throw Error(ErrorCode::invalid_argument, "Dirichlet solver supports x-derivatives only");
      }
      const int d = wt.term.deriv_x;
      if (d > 0 && !ops_.count(d)) {
        ops_.emplace(d, LineDerivative(LineDerivative::Kind::central_fd, d, 4, n_, h_));
      }
    }
    for (const auto& [d, op] : ops_) derivs_[d].resize(n_);
  }

  FieldTensor run(const InitialCondition& ic) {
    std::vector<double> u(n_);
    for (std::size_t i = 0; i < n_; ++i) u[i] = ic(grid_.x.min + h_ * static_cast<double>(i), 0.0);
    u.front() = 0.0;
    u.back() = 0.0;

    std::vector<double> out(grid_.size());
    store(u, out, 0);
    std::vector<double> k1(n_), k2(n_), k3(n_), k4(n_), tmp(n_);
    std::size_t used = 0;
    const double interval = grid_.t.spacing();
    for (std::size_t it = 1; it < grid_.nt(); ++it) {
      const std::size_t nsub = substeps_for(interval, dt_limit(u), opts_.min_substeps_per_output);
      if (nsub > opts_.max_substeps || used + nsub > opts_.max_substeps) {
        throw Error(ErrorCode::unstable_configuration, "unstable configuration");
      }
      used += nsub;
      const double dt = interval / static_cast<double>(nsub);
      for (std::size_t s = 0; s < nsub; ++s) {
        eval(u, k1);
        axpy(u, 0.5 * dt, k1, tmp);
        eval(tmp, k2);
        axpy(u, 0.5 * dt, k2, tmp);
        eval(tmp, k3);
        axpy(u, dt, k3, tmp);
        eval(tmp, k4);
        for (std::size_t i = 0; i < n_; ++i) u[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
      }
      check_blowup(u, opts_.blowup_threshold);
      store(u, out, it);
    }
    return FieldTensor(grid_, std::move(out));
  }

 private:
  static void axpy(const std::vector<double>& u, double a, const std::vector<double>& k, std::vector<double>& out) {
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + a * k[i];
  }

  void store(const std::vector<double>& u, std::vector<double>& out, std::size_t it) const {
    for (std::size_t ix = 0; ix < grid_.nx(); ++ix) out[it * grid_.nx() + ix] = u[ix * r_];
  }

  void eval(const std::vector<double>& u, std::vector<double>& du) {
    for (auto& [d, op] : ops_) op.apply(u.data(), derivs_[d].data(), 1);
    std::fill(du.begin(), du.end(), 0.0);
    for (const auto& wt : rhs_) {
      const int p = wt.term.poly_power;
      const int d = wt.term.deriv_x;
      const double c = wt.coefficient;
      if (d == 0) {
        for (std::size_t i = 0; i < n_; ++i) du[i] += c * ipow(u[i], p);
      } else {
        const auto& D = derivs_[d];
        for (std::size_t i = 0; i < n_; ++i) du[i] += c * ipow(u[i], p) * D[i];
      }
    }
    du.front() = 0.0;
    du.back() = 0.0;
  }

  double dt_limit(std::vector<double>& u) {
    const double amp = max_abs(u);
    for (auto& [d, op] : ops_) op.apply(u.data(), derivs_[d].data(), 1);
    double lambda = 0.0;
    for (const auto& wt : rhs_) {
      const int p = wt.term.poly_power;
      const int d = wt.term.deriv_x;
      const double c = std::abs(wt.coefficient);
      if (d == 0) {
        lambda += c * p * ipow(amp, std::max(p - 1, 0));
      } else {
        // Boundary stencils have somewhat larger symbols than the centred one.
        lambda += c * ipow(amp, p) * ops_.at(d).spectral_radius() * 1.2;
        if (p > 0) lambda += c * p * ipow(amp, p - 1) * max_abs(derivs_[d]);
      }
    }
    if (lambda == 0.0) return grid_.t.spacing();
    return opts_.safety * kRk4Radius / lambda;
  }

  std::vector<WeightedTerm> rhs_;
  Grid grid_;
  SolverOptions opts_;
  std::size_t r_ = 1;
  std::size_t n_ = 0;
  double h_ = 0.0;
  std::map<int, LineDerivative> ops_;
  std::map<int, std::vector<double>> derivs_;
};

// ---------------------------------------------------------------------------
// Periodic, 1D or 2D, Fourier pseudospectral

struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~FftPlans() {
    std::lock_guard lock(fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

struct DerivKey {
  int dx;
  int dy;
  bool grouped;
  auto operator<=>(const DerivKey&) const = default;
};

class PeriodicSolver {
 public:
  PeriodicSolver(std::span<const WeightedTerm> rhs, const Grid& grid, const SolverOptions& opts)
      : grid_(grid), opts_(opts) {
    r_ = static_cast<std::size_t>(std::max(1, opts.refine_factor));
    nx_ = grid.nx() * r_;
    ny_ = grid.y ? grid.ny() * r_ : 1;
    two_d_ = grid.y.has_value();
    nyc_ = two_d_ ? ny_ / 2 + 1 : 1;
    nxc_ = two_d_ ? nx_ : nx_ / 2 + 1;
    hx_ = grid.x.spacing() / static_cast<double>(r_);
    hy_ = two_d_ ? grid.y->spacing() / static_cast<double>(r_) : 1.0;
    const double lx = grid.x.spacing() * static_cast<double>(grid.nx());
    const double ly = two_d_ ? grid.y->spacing() * static_cast<double>(grid.ny()) : 1.0;

    real_.resize(nx_ * ny_);
    spec_.resize(nxc_ * nyc_);
    {
      std::lock_guard lock(fftw_planner_mutex());
      auto* in = real_.data();
      auto* out = reinterpret_cast<fftw_complex*>(spec_.data());
      if (two_d_) {
        plans_.forward = fftw_plan_dft_r2c_2d(int(nx_), int(ny_), in, out, FFTW_ESTIMATE);
        plans_.backward = fftw_plan_dft_c2r_2d(int(nx_), int(ny_), out, in, FFTW_ESTIMATE);
      } else {
        plans_.forward = fftw_plan_dft_r2c_1d(int(nx_), in, out, FFTW_ESTIMATE);
        plans_.backward = fftw_plan_dft_c2r_1d(int(nx_), out, in, FFTW_ESTIMATE);
      }
    }

    // Wavenumbers on the half-complex layout.
    kx_.resize(nxc_ * nyc_);
    ky_.resize(nxc_ * nyc_);
    nyq_x_.resize(nxc_ * nyc_);
    nyq_y_.resize(nxc_ * nyc_);
    keep_.resize(nxc_ * nyc_);
    for (std::size_t i = 0; i < nxc_; ++i) {
      for (std::size_t j = 0; j < nyc_; ++j) {
        const std::size_t m = i * nyc_ + j;
        const long ix = two_d_ ? (i <= nx_ / 2 ? long(i) : long(i) - long(nx_)) : long(i);
        const long iy = two_d_ ? long(j) : 0;
        kx_[m] = 2.0 * std::numbers::pi / lx * double(ix);
        ky_[m] = 2.0 * std::numbers::pi / ly * double(iy);
        nyq_x_[m] = (nx_ % 2 == 0) && std::abs(ix) == long(nx_ / 2);
        nyq_y_[m] = two_d_ && (ny_ % 2 == 0) && iy == long(ny_ / 2);
        keep_[m] = 3 * std::abs(ix) <= long(nx_) && (!two_d_ || 3 * std::abs(iy) <= long(ny_));
      }
    }
    kmax_x_ = 2.0 * std::numbers::pi / lx * double(nx_ / 3);
    kmax_y_ = two_d_ ? 2.0 * std::numbers::pi / ly * double(ny_ / 3) : 0.0;

    linear_.assign(nxc_ * nyc_, cplx(0.0, 0.0));
    for (const auto& wt : rhs) {
      const auto& t = wt.term;
      if (!two_d_ && (t.deriv_y != 0 || t.grouped)) {
        throw Error(ErrorCode::invalid_argument, "y-derivative in a 1D problem");
      }
      const bool is_linear = (t.poly_power == 1 && !t.has_derivative()) || (t.poly_power == 0 && t.has_derivative());
      if (is_linear) {
        for (std::size_t m = 0; m < linear_.size(); ++m) linear_[m] += wt.coefficient * multiplier(t, m);
      } else {
        nonlinear_.push_back(wt);
        if (t.has_derivative()) {
          const DerivKey key{t.deriv_x, t.deriv_y, t.grouped};
          if (!derivs_.count(key)) derivs_[key].resize(nx_ * ny_);
        }
      }
    }
    u_.resize(nx_ * ny_);
  }

  FieldTensor run(const InitialCondition& ic) {
    for (std::size_t i = 0; i < nx_; ++i) {
      for (std::size_t j = 0; j < ny_; ++j) {
        const double x = grid_.x.min + hx_ * double(i);
        const double y = two_d_ ? grid_.y->min + hy_ * double(j) : 0.0;
        u_[i * ny_ + j] = ic(x, y);
      }
    }
    std::vector<double> out(grid_.size());
    store(u_, out, 0);

    std::vector<cplx> v = forward(u_);
    const std::size_t nc = v.size();
    std::vector<cplx> k1(nc), k2(nc), k3(nc), k4(nc), w(nc), e_half(nc), e_full(nc);
    std::size_t used = 0;
    double cached_dt = -1.0;
    const double interval = grid_.t.spacing();
    for (std::size_t it = 1; it < grid_.nt(); ++it) {
      const std::size_t nsub = substeps_for(interval, dt_limit(v), opts_.min_substeps_per_output);
      if (nsub > opts_.max_substeps || used + nsub > opts_.max_substeps) {
        throw Error(ErrorCode::unstable_configuration, "unstable configuration");
      }
      used += nsub;
      const double dt = interval / double(nsub);
      if (dt != cached_dt) {
        for (std::size_t m = 0; m < nc; ++m) {
          e_half[m] = std::exp(linear_[m] * (0.5 * dt));
          e_full[m] = e_half[m] * e_half[m];
        }
        cached_dt = dt;
      }
      for (std::size_t s = 0; s < nsub; ++s) {
        nonlinear(v, k1);
        for (std::size_t m = 0; m < nc; ++m) w[m] = e_half[m] * (v[m] + 0.5 * dt * k1[m]);
        nonlinear(w, k2);
        for (std::size_t m = 0; m < nc; ++m) w[m] = e_half[m] * v[m] + 0.5 * dt * k2[m];
        nonlinear(w, k3);
        for (std::size_t m = 0; m < nc; ++m) w[m] = e_full[m] * v[m] + dt * e_half[m] * k3[m];
        nonlinear(w, k4);
        for (std::size_t m = 0; m < nc; ++m) {
          v[m] = e_full[m] * v[m] +
                 dt / 6.0 * (e_full[m] * k1[m] + 2.0 * e_half[m] * (k2[m] + k3[m]) + k4[m]);
        }
      }
      backward(v, u_);
      check_blowup(u_, opts_.blowup_threshold);
      store(u_, out, it);
    }
    return FieldTensor(grid_, std::move(out));
  }

 private:
  cplx multiplier(const TermSpec& t, std::size_t m) const {
    const cplx ikx(0.0, kx_[m]);
    const cplx iky(0.0, ky_[m]);
    auto power = [](cplx z, int p) {
      cplx r(1.0, 0.0);
      for (int i = 0; i < p; ++i) r *= z;
      return r;
    };
    if (!t.has_derivative()) return cplx(1.0, 0.0);
    if (t.grouped) {
      const int d = t.deriv_x;
      const cplx a = (d % 2 == 1 && nyq_x_[m]) ? cplx(0.0) : power(ikx, d);
      const cplx b = (d % 2 == 1 && nyq_y_[m]) ? cplx(0.0) : power(iky, d);
      return a + b;
    }
    if ((t.deriv_x % 2 == 1 && nyq_x_[m]) || (t.deriv_y % 2 == 1 && nyq_y_[m])) return cplx(0.0);
    return power(ikx, t.deriv_x) * power(iky, t.deriv_y);
  }

  std::vector<cplx> forward(const std::vector<double>& u) {
    std::copy(u.begin(), u.end(), real_.begin());
    fftw_execute(plans_.forward);
    return spec_;
  }

  void backward(const std::vector<cplx>& v, std::vector<double>& u) {
    std::copy(v.begin(), v.end(), spec_.begin());
    fftw_execute(plans_.backward);
    const double norm = 1.0 / double(nx_ * ny_);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = real_[i] * norm;
  }

  void nonlinear(const std::vector<cplx>& v, std::vector<cplx>& out) {
    if (nonlinear_.empty()) {
      std::fill(out.begin(), out.end(), cplx(0.0));
      return;
    }
    backward(v, u_);
    for (auto& [key, buf] : derivs_) {
      const TermSpec t{0, key.dx, key.dy, key.grouped, 0};
      std::vector<cplx> dv(v.size());
      for (std::size_t m = 0; m < v.size(); ++m) dv[m] = v[m] * multiplier(t, m);
      backward(dv, buf);
    }
    std::vector<double> s(nx_ * ny_, 0.0);
    for (const auto& wt : nonlinear_) {
      const auto& t = wt.term;
      const double c = wt.coefficient;
      if (!t.has_derivative()) {
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += c * ipow(u_[i], t.poly_power);
      } else {
        const auto& D = derivs_.at(DerivKey{t.deriv_x, t.deriv_y, t.grouped});
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += c * ipow(u_[i], t.poly_power) * D[i];
      }
    }
    out = forward(s);
    for (std::size_t m = 0; m < out.size(); ++m) {
      if (!keep_[m]) out[m] = cplx(0.0);
    }
  }

  double dt_limit(const std::vector<cplx>& v) {
    backward(v, u_);
    const double amp = max_abs(u_);
    double lambda = 0.0;
    for (const auto& wt : nonlinear_) {
      const auto& t = wt.term;
      const double c = std::abs(wt.coefficient);
      const int p = t.poly_power;
      if (!t.has_derivative()) {
        lambda += c * p * ipow(amp, std::max(p - 1, 0));
        continue;
      }
      double kappa = 0.0;
      if (t.grouped) {
        kappa = std::pow(kmax_x_, t.deriv_x) + std::pow(kmax_y_, t.deriv_x);
      } else {
        kappa = std::pow(kmax_x_, t.deriv_x) * std::pow(two_d_ ? kmax_y_ : 1.0, t.deriv_y);
      }
      lambda += c * ipow(amp, p) * kappa;
      if (p > 0) {
        const TermSpec d{0, t.deriv_x, t.deriv_y, t.grouped, 0};
        std::vector<cplx> dv(v.size());
        for (std::size_t m = 0; m < v.size(); ++m) dv[m] = v[m] * multiplier(d, m);
        std::vector<double> buf(u_.size());
        backward(dv, buf);
        lambda += c * p * ipow(amp, p - 1) * max_abs(buf);
      }
    }
    if (lambda == 0.0) return grid_.t.spacing();
    return opts_.safety * kRk4Radius / lambda;
  }

  void store(const std::vector<double>& u, std::vector<double>& out, std::size_t it) const {
    const std::size_t base = it * grid_.slice_size();
    for (std::size_t ix = 0; ix < grid_.nx(); ++ix) {
      for (std::size_t iy = 0; iy < grid_.ny(); ++iy) {
        out[base + ix * grid_.ny() + iy] = u[(ix * r_) * ny_ + (two_d_ ? iy * r_ : 0)];
      }
    }
  }

  Grid grid_;
  SolverOptions opts_;
  std::size_t r_ = 1, nx_ = 0, ny_ = 1, nxc_ = 0, nyc_ = 1;
  bool two_d_ = false;
  double hx_ = 0.0, hy_ = 0.0, kmax_x_ = 0.0, kmax_y_ = 0.0;
  std::vector<double> real_;
  std::vector<cplx> spec_;
  FftPlans plans_;
  std::vector<double> kx_, ky_;
  std::vector<bool> nyq_x_, nyq_y_, keep_;
  std::vector<cplx> linear_;
  std::vector<WeightedTerm> nonlinear_;
  std::map<DerivKey, std::vector<double>> derivs_;
  std::vector<double> u_;
};

}  // namespace

FieldTensor solve_pde(std::span<const WeightedTerm> rhs, const InitialCondition& ic, const Grid& grid,
                      const SolverOptions& opts) {
  grid.validate();
  for (const auto& wt : rhs) {
    if (!std::isfinite(wt.coefficient)) throw Error(ErrorCode::invalid_argument, "non-finite coefficient");
  }
  if (opts.boundary == Boundary::dirichlet_zero) {
    if (grid.y) throw Error(ErrorCode::invalid_argument, "Dirichlet solver is 1D only");
    return DirichletSolver(rhs, grid, opts).run(ic);
  }
  return PeriodicSolver(rhs, grid, opts).run(ic);
}

InitialCondition interpolate_slice(const Grid& grid, std::span<const double> slice, Boundary boundary) {
  if (slice.size() != grid.slice_size()) throw Error(ErrorCode::dimension_mismatch, "slice does not match grid");
  std::vector<double> data(slice.begin(), slice.end());
  if (boundary == Boundary::dirichlet_zero) {
    const Axis ax = grid.x;
    data.front() = 0.0;
    data.back() = 0.0;
    return [ax, data](double x, double) {
      const double s = (x - ax.min) / ax.spacing();
      const long n = long(ax.n);
      long i0 = std::clamp(long(std::floor(s)) - 1, 0L, n - 4);
      double acc = 0.0;
      for (long j = 0; j < 4; ++j) {
        double w = 1.0;
        for (long k = 0; k < 4; ++k) {
          if (k != j) w *= (s - double(i0 + k)) / double(j - k);
        }
        acc += w * data[std::size_t(i0 + j)];
      }
      return acc;
    };
  }
  // Trigonometric interpolation through the (x[, y]) samples.
  const std::size_t nx = grid.nx();
  const std::size_t ny = grid.ny();
  const double lx = grid.x.spacing() * double(nx);
  const double ly = grid.y ? grid.y->spacing() * double(ny) : 1.0;
  std::vector<cplx> coeffs(nx * ny);
  // Direct DFT is fine at stored-grid sizes and avoids plan management here.
  for (std::size_t kx = 0; kx < nx; ++kx) {
    std::vector<cplx> row(ny, cplx(0.0));
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const cplx ph = std::polar(1.0, -2.0 * std::numbers::pi * double(kx * ix % nx) / double(nx));
      for (std::size_t iy = 0; iy < ny; ++iy) row[iy] += ph * data[ix * ny + iy];
    }
    for (std::size_t ky = 0; ky < ny; ++ky) {
      cplx s(0.0);
      for (std::size_t iy = 0; iy < ny; ++iy) {
        s += row[iy] * std::polar(1.0, -2.0 * std::numbers::pi * double(ky * iy % ny) / double(ny));
      }
      coeffs[kx * ny + ky] = s / double(nx * ny);
    }
  }
  const double x0 = grid.x.min;
  const double y0 = grid.y ? grid.y->min : 0.0;
  return [coeffs, nx, ny, lx, ly, x0, y0](double x, double y) {
    auto wave = [](std::size_t k, std::size_t n) { return k <= n / 2 ? long(k) : long(k) - long(n); };
    // A Nyquist component contributes a cosine so the interpolant stays real
    // and symmetric between nodes.
    auto factor = [](long w, bool nyquist, double frac) -> cplx {
      const double phase = 2.0 * std::numbers::pi * double(w) * frac;
      return nyquist ? cplx(std::cos(phase), 0.0) : std::polar(1.0, phase);
    };
    const double fx = (x - x0) / lx;
    const double fy = (y - y0) / ly;
    double acc = 0.0;
    for (std::size_t kx = 0; kx < nx; ++kx) {
      const cplx ex = factor(wave(kx, nx), nx % 2 == 0 && kx == nx / 2, fx);
      for (std::size_t ky = 0; ky < ny; ++ky) {
        const cplx ey = factor(wave(ky, ny), ny > 1 && ny % 2 == 0 && ky == ny / 2, fy);
        acc += std::real(coeffs[kx * ny + ky] * ex * ey);
      }
    }
    return acc;
  };
}

}  // namespace psipde
