#include "psipde/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psipde/rng.hpp"

namespace psipde {

void StridgeConfig::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (!(d_tol > 0.0)) throw Error(ErrorCode::invalid_argument, "d_tol must be positive");
  if (max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be >= 1");
  if (tol_iters < 1) throw Error(ErrorCode::invalid_argument, "tol_iters must be >= 1");
  if (!(split > 0.0 && split < 1.0)) throw Error(ErrorCode::invalid_argument, "split must lie in (0, 1)");
}

namespace {

Eigen::VectorXd ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  if (lambda == 0.0) return lstsq(x, y).coefficients;
  Eigen::MatrixXd a = x.transpose() * x;
  a.diagonal().array() += lambda;
  return lstsq(a, x.transpose() * y).coefficients;
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(x.rows(), Eigen::Index(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(Eigen::Index(k)) = x.col(idx[k]);
  return out;
}

}  // namespace

Eigen::VectorXd stridge_fixed(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target, double lambda,
                              double tol, int max_iters) {
  const Eigen::Index d = theta.cols();
  Eigen::VectorXd w = ridge(theta, target, lambda);
  std::vector<Eigen::Index> big(static_cast<std::size_t>(d));
  std::iota(big.begin(), big.end(), Eigen::Index{0});
  std::size_t relevant = big.size();
  for (int j = 0; j < max_iters; ++j) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(std::abs(w(i)) < tol)) keep.push_back(i);
    }
    if (keep.size() == relevant) break;
    relevant = keep.size();
    if (keep.empty()) {
      if (j == 0) return Eigen::VectorXd::Zero(d);
      break;
    }
    big = keep;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd sub = ridge(columns(theta, big), target, lambda);
    for (std::size_t k = 0; k < big.size(); ++k) next(big[k]) = sub(Eigen::Index(k));
    w = next;
  }
  if (!big.empty()) {
    const Eigen::VectorXd sub = lstsq(columns(theta, big), target).coefficients;
    w.setZero();
    for (std::size_t k = 0; k < big.size(); ++k) w(big[k]) = sub(Eigen::Index(k));
  }
  return w;
}

StridgeResult stridge(const RegressionSystem& sys, const StridgeConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = sys.rows(), d = sys.cols();
  if (n < 4 || d < 1) throw Error(ErrorCode::invalid_argument, "system too small for STRidge");
  const double t_rms = std::sqrt(sys.target.squaredNorm() / double(n));
  if (!(t_rms > 0.0)) throw Error(ErrorCode::degenerate_target, "degenerate target");
  Eigen::VectorXd norms(d);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    norms(j) = sys.theta.col(j).norm();
    x.col(j) = norms(j) > 0.0 ? Eigen::VectorXd(sys.theta.col(j) / norms(j)) : Eigen::VectorXd::Zero(n);
  }
  const Eigen::VectorXd y = sys.target / t_rms;

  StridgeResult res;
  res.terms = sys.terms;
  if (cfg.l0_penalty >= 0.0) {
    res.l0_penalty = cfg.l0_penalty;
  } else {
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(x).singularValues();
    const double smin = sv(sv.size() - 1);
    res.l0_penalty = 0.001 * (smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::max());
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  CounterRng rng(cfg.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t n_trn = std::size_t(std::lround(cfg.split * double(n)));
  std::vector<Eigen::Index> trn(order.begin(), order.begin() + std::ptrdiff_t(n_trn));
  std::vector<Eigen::Index> tst(order.begin() + std::ptrdiff_t(n_trn), order.end());
  std::vector<Eigen::Index> all_cols(static_cast<std::size_t>(d));
  std::iota(all_cols.begin(), all_cols.end(), Eigen::Index{0});
  const Eigen::MatrixXd x_trn = take(x, trn, all_cols), x_tst = take(x, tst, all_cols);
  const Eigen::VectorXd y_trn = take(y, trn), y_tst = take(y, tst);

  auto score = [&](const Eigen::VectorXd& w) {
    const double nnz = double((w.array() != 0.0).count());
    return (y_tst - x_tst * w).norm() + res.l0_penalty * nnz;
  };
  Eigen::VectorXd w_best = lstsq(x_trn, y_trn).coefficients;
  double err_best = score(w_best);
  double d_tol = cfg.d_tol, tol = cfg.d_tol, tol_best = 0.0;
  for (int it = 0; it < cfg.tol_iters; ++it) {
    const Eigen::VectorXd w = stridge_fixed(x_trn, y_trn, cfg.lambda, tol, cfg.max_iters);
    const double err = score(w);
    if (err <= err_best) {
      err_best = err;
      w_best = w;
      tol_best = tol;
      tol += d_tol;
    } else {
      tol = std::max(0.0, tol - 2.0 * d_tol);
      d_tol = 2.0 * d_tol / double(cfg.tol_iters - it);
      tol += d_tol;
    }
  }
  res.best_tolerance = tol_best;
  res.coefficients = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (w_best(j) != 0.0 && norms(j) > 0.0) {
      res.coefficients(j) = w_best(j) * t_rms / norms(j);
      res.support.push_back(sys.terms[std::size_t(j)].index);
    }
  }
  res.empty = res.support.empty();
  return res;
}

}  // namespace psipde
