#include "psipde/stencil.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "psipde/core.hpp"

namespace psipde {

std::vector<std::vector<double>> fornberg_weights(double x0, std::span<const double> nodes, int max_order) {
  const std::size_t n = nodes.size();
  const auto m = static_cast<std::size_t>(max_order);
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        }
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
      }
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

namespace {

std::vector<double> savgol_weights(double x0, std::size_t window, int degree, int order) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(window), degree + 1);
  for (std::size_t j = 0; j < window; ++j) {
    const double s = static_cast<double>(j) - x0;
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      v(static_cast<Eigen::Index>(j), k) = p;
      p *= s;
    }
  }
  const Eigen::MatrixXd pinv = v.completeOrthogonalDecomposition().pseudoInverse();
  double fact = 1.0;
  for (int k = 2; k <= order; ++k) fact *= k;
  std::vector<double> w(window);
  for (std::size_t j = 0; j < window; ++j) w[j] = fact * pinv(order, static_cast<Eigen::Index>(j));
  return w;
}

}  // namespace

LineDerivative::LineDerivative(Kind kind, int order, int accuracy, std::size_t n, double h, int window)
    : order_(order), n_(n) {
  if (order < 1 || order > 4) throw Error(ErrorCode::invalid_argument, "derivative order must be 1..4");
  if (kind == Kind::central_fd) {
    if (accuracy != 2 && accuracy != 4) throw Error(ErrorCode::invalid_argument, "stencil_order must be 2 or 4");
    width_ = static_cast<std::size_t>(2 * ((order + 1) / 2) - 1 + accuracy);
  } else {
    if (window < accuracy + 1 || window % 2 == 0 || accuracy < order) {
      throw Error(ErrorCode::invalid_argument, "poly_interp window must be odd and exceed the polynomial degree");
    }
    width_ = static_cast<std::size_t>(window);
  }
  half_ = (width_ - 1) / 2;
  if (n < width_) throw Error(ErrorCode::invalid_argument, "grid too small for stencil");

  const double scale = std::pow(h, -order);
  auto weights_at = [&](double x0) {
    std::vector<double> w;
    if (kind == Kind::central_fd) {
      std::vector<double> nodes(width_);
      for (std::size_t j = 0; j < width_; ++j) nodes[j] = static_cast<double>(j);
      w = fornberg_weights(x0, nodes, order)[static_cast<std::size_t>(order)];
    } else {
      w = savgol_weights(x0, width_, accuracy, order);
    }
    for (auto& x : w) x *= scale;
    return w;
  };
  central_ = weights_at(static_cast<double>(half_));
  for (std::size_t r = 0; r < half_; ++r) edge_.push_back(weights_at(static_cast<double>(r)));
}

void LineDerivative::apply(const double* in, double* out, std::size_t stride) const {
  const double sign = (order_ % 2 == 0) ? 1.0 : -1.0;
  for (std::size_t r = 0; r < half_; ++r) {
    double left = 0.0;
    double right = 0.0;
    for (std::size_t j = 0; j < width_; ++j) {
      left += edge_[r][j] * in[j * stride];
      right += edge_[r][j] * in[(n_ - 1 - j) * stride];
    }
    out[r * stride] = left;
    out[(n_ - 1 - r) * stride] = sign * right;
  }
  for (std::size_t i = half_; i + half_ < n_; ++i) {
    const double* base = in + (i - half_) * stride;
    double s = 0.0;
    for (std::size_t j = 0; j < width_; ++j) s += central_[j] * base[j * stride];
    out[i * stride] = s;
  }
}

double LineDerivative::spectral_radius() const {
  double best = 0.0;
  const int samples = 512;
  for (int k = 0; k <= samples; ++k) {
    const double theta = std::numbers::pi * k / samples;
    double re = 0.0;
    double im = 0.0;
    for (std::size_t j = 0; j < width_; ++j) {
      const double off = static_cast<double>(j) - static_cast<double>(half_);
      re += central_[j] * std::cos(theta * off);
      im += central_[j] * std::sin(theta * off);
    }
    best = std::max(best, std::hypot(re, im));
  }
  return best;
}

}  // namespace psipde
