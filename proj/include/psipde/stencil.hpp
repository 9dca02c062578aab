#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace psipde {

// Finite-difference weights for derivatives 0..max_order at x0 on arbitrary
// nodes (Fornberg's recursion). Result is indexed [order][node].
std::vector<std::vector<double>> fornberg_weights(double x0, std::span<const double> nodes, int max_order);

// Derivative of one order along a uniform line of n samples. Interior rows use
// a centred stencil; rows within `half_width()` of either end use a shifted
// stencil of the same point count.
class LineDerivative {
 public:
  enum class Kind { central_fd, poly_interp };

  // central_fd: `accuracy` is the formal order (2 or 4).
  // poly_interp: local least-squares polynomial of degree `accuracy` over
  // `window` points (Savitzky-Golay).
  LineDerivative(Kind kind, int order, int accuracy, std::size_t n, double h, int window = 9);

  int order() const { return order_; }
  std::size_t half_width() const { return half_; }
  std::size_t n() const { return n_; }

  // Applies along a strided line: in[i * stride] for i < n.
  void apply(const double* in, double* out, std::size_t stride) const;

  // Largest |symbol| of the centred stencil over all wavenumbers, scaled by
  // h^-order. Used for explicit time-step limits.
  double spectral_radius() const;

 private:
  int order_;
  std::size_t n_;
  std::size_t half_;
  std::size_t width_;
  std::vector<double> central_;
  // edge_[r] holds weights for row r (r < half_) over nodes 0..width_-1;
  // the right edge mirrors it with the sign of (-1)^order.
  std::vector<std::vector<double>> edge_;
};

}  // namespace psipde
