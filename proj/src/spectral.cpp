#include "psipde/spectral.hpp"

#include <fftw3.h>

#include <cmath>

#include "psipde/fftw_lock.hpp"

namespace psipde {

using cplx = std::complex<double>;

namespace {

long signed_wave(std::size_t i, std::size_t n) { return i <= n / 2 ? long(i) : long(i) - long(n); }
std::size_t wrap(long k, std::size_t n) { return std::size_t((k % long(n) + long(n)) % long(n)); }

}  // namespace

ModeSet block_modes(const RowBlock& block) {
  ModeSet ms;
  ms.dims = {block.nt, block.nx, block.ny};
  const bool three = block.ny > 1;
  const std::size_t n0 = block.nt, n1 = block.nx, n2 = block.ny;
  const std::size_t last = three ? n2 : n1;
  const std::size_t lastc = last / 2 + 1;
  const double naxes = three ? 3.0 : 2.0;

  for (std::size_t a = 0; a < n0; ++a) {
    const std::size_t nb = three ? n1 : lastc;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t nc = three ? lastc : 1;
      for (std::size_t c = 0; c < nc; ++c) {
        const long kt = signed_wave(a, n0);
        const long kx = three ? signed_wave(b, n1) : long(b);
        const long ky = three ? long(c) : 0;
        const std::size_t last_idx = three ? c : b;
        const bool on_plane = last_idx == 0 || (last % 2 == 0 && last_idx == last / 2);
        double mult = 2.0;
        if (on_plane) {
          // Conjugate partner lies in the same plane: keep one representative.
          const std::size_t pa = wrap(-kt, n0);
          const std::size_t pb = three ? wrap(-kx, n1) : b;
          if (std::make_pair(pa, pb) < std::make_pair(a, b)) continue;
          mult = (pa == a && pb == b) ? 1.0 : 2.0;
        }
        double r2 = std::pow(double(kt) / (double(n0) / 2.0), 2) + std::pow(double(kx) / (double(n1) / 2.0), 2);
        if (three) r2 += std::pow(double(ky) / (double(n2) / 2.0), 2);
        ms.wavenumbers.push_back({kt, kx, ky});
        ms.radius.push_back(std::sqrt(r2 / naxes));
        ms.multiplicity.push_back(mult);
        ms.offset.push_back(three ? (a * n1 + b) * lastc + c : a * lastc + b);
      }
    }
  }
  return ms;
}

std::vector<cplx> block_transform(const Eigen::VectorXd& column, const ModeSet& modes) {
  const auto [n0, n1, n2] = modes.dims;
  const std::size_t total = n0 * n1 * n2;
  if (std::size_t(column.size()) != total) throw Error(ErrorCode::cannot_reshape, "cannot reshape for FFT");
  const bool three = n2 > 1;
  const std::size_t outsize = three ? n0 * n1 * (n2 / 2 + 1) : n0 * (n1 / 2 + 1);
  std::vector<double> in(column.data(), column.data() + total);
  std::vector<cplx> out(outsize);
  fftw_plan plan = nullptr;
  {
    std::lock_guard lock(fftw_planner_mutex());
    auto* o = reinterpret_cast<fftw_complex*>(out.data());
    plan = three ? fftw_plan_dft_r2c_3d(int(n0), int(n1), int(n2), in.data(), o, FFTW_ESTIMATE)
                 : fftw_plan_dft_r2c_2d(int(n0), int(n1), in.data(), o, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / std::sqrt(double(total));
  std::vector<cplx> res(modes.offset.size());
  for (std::size_t m = 0; m < res.size(); ++m) res[m] = out[modes.offset[m]] * scale;
  return res;
}

FreqSystem to_freq(const Library& lib, double cutoff_fraction) {
  if (!(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "cutoff_fraction must lie in (0, 1]");
  }
  const RowBlock& rb = lib.matrix.rows;
  if (rb.size() != std::size_t(lib.matrix.columns.rows()) || std::size_t(lib.target.size()) != rb.size()) {
    throw Error(ErrorCode::cannot_reshape, "cannot reshape for FFT");
  }
  const ModeSet ms = block_modes(rb);
  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < ms.radius.size(); ++m) {
    const auto& k = ms.wavenumbers[m];
    const bool zero = k[0] == 0 && k[1] == 0 && k[2] == 0;
    if (zero || ms.radius[m] <= cutoff_fraction + 1e-12) keep.push_back(m);
  }
  FreqSystem fs;
  fs.cutoff_fraction = cutoff_fraction;
  fs.terms = lib.matrix.terms;
  const auto rows = Eigen::Index(keep.size());
  fs.theta.resize(rows, lib.matrix.columns.cols());
  for (Eigen::Index j = 0; j < lib.matrix.columns.cols(); ++j) {
    const auto tr = block_transform(lib.matrix.columns.col(j), ms);
    for (Eigen::Index r = 0; r < rows; ++r) fs.theta(r, j) = tr[keep[std::size_t(r)]];
  }
  const auto tt = block_transform(lib.target, ms);
  fs.target.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) fs.target(r) = tt[keep[std::size_t(r)]];
  for (auto m : keep) {
    fs.kept_modes.push_back(ms.wavenumbers[m]);
    fs.multiplicity.push_back(ms.multiplicity[m]);
  }
  return fs;
}

RegressionSystem realify(const FreqSystem& fs) {
  RegressionSystem rs;
  const Eigen::Index m = fs.theta.rows();
  rs.theta.resize(2 * m, fs.theta.cols());
  rs.target.resize(2 * m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double w = std::sqrt(fs.multiplicity[std::size_t(r)]);
    rs.theta.row(2 * r) = w * fs.theta.row(r).real();
    rs.theta.row(2 * r + 1) = w * fs.theta.row(r).imag();
    rs.target(2 * r) = w * fs.target(r).real();
    rs.target(2 * r + 1) = w * fs.target(r).imag();
  }
  rs.terms = fs.terms;
  rs.group_size = 2;
  return rs;
}

}  // namespace psipde
