#include "psipde/select.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "psipde/parallel.hpp"
#include "psipde/rng.hpp"

namespace psipde {

void SelectionConfig::validate() const {
  if (n_val < 50) throw Error(ErrorCode::invalid_argument, "n_val must be >= 50");
  if (!(split > 0.0 && split < 1.0)) throw Error(ErrorCode::invalid_argument, "split must lie in (0, 1)");
  if (!(gamma_reg > 0.0 && gamma_reg < 1.0) || !(gamma_bic > 0.0 && gamma_bic < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "gamma_reg and gamma_bic must lie in (0, 1)");
  }
  if (!(branch_tolerance >= 0.0)) throw Error(ErrorCode::invalid_argument, "branch_tolerance must be >= 0");
  if (max_terms < 1) throw Error(ErrorCode::invalid_argument, "max_terms must be >= 1");
  if (max_branches < 1) throw Error(ErrorCode::invalid_argument, "max_branches must be >= 1");
}

const char* to_string(StopRule r) { return r == StopRule::either ? "either" : "both"; }

StopRule parse_stop_rule(const std::string& name) {
  if (name == "either") return StopRule::either;
  if (name == "both") return StopRule::both;
  throw Error(ErrorCode::invalid_argument, "unknown stop rule '" + name + "'");
}

const char* to_string(ScreenMode m) { return m == ScreenMode::drop_one ? "drop_one" : "add_one"; }

int NormalizedSystem::column_of(int library_index) const {
  for (std::size_t c = 0; c < terms.size(); ++c) {
    if (terms[c].index == library_index) return static_cast<int>(c);
  }
  return -1;
}

Eigen::VectorXd NormalizedSystem::fit(std::span<const int> support) const {
  std::vector<Eigen::Index> cols;
  for (int idx : support) {
    const int c = column_of(idx);
    if (c < 0) throw Error(ErrorCode::invalid_argument, "index " + std::to_string(idx) + " is not an active column");
    cols.push_back(c);
  }
  Eigen::MatrixXd a(theta.rows(), Eigen::Index(cols.size()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) a.col(j) = theta.col(cols[std::size_t(j)]);
  Eigen::VectorXd xi = lstsq(a, target).coefficients;
  for (Eigen::Index j = 0; j < xi.size(); ++j) xi(j) *= target_norm / column_norms[std::size_t(cols[std::size_t(j)])];
  return xi;
}

NormalizedSystem normalize_system(const RegressionSystem& sys) {
  if (sys.theta.rows() != sys.target.size()) {
    throw Error(ErrorCode::dimension_mismatch, "library rows do not match target length");
  }
  if (std::size_t(sys.theta.cols()) != sys.terms.size()) {
    throw Error(ErrorCode::dimension_mismatch, "library columns do not match term list");
  }
  NormalizedSystem ns;
  ns.group_size = sys.group_size;
  ns.library_size = static_cast<int>(sys.terms.size());
  ns.target_norm = sys.target.norm();
  if (!(ns.target_norm > 0.0) || !std::isfinite(ns.target_norm)) {
    throw Error(ErrorCode::degenerate_target, "degenerate target");
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < sys.theta.cols(); ++j) {
    const double n = sys.theta.col(j).norm();
    if (n > 0.0 && std::isfinite(n)) {
      keep.push_back(j);
      ns.column_norms.push_back(n);
      ns.terms.push_back(sys.terms[std::size_t(j)]);
    } else {
      ns.dropped.push_back(sys.terms[std::size_t(j)].index);
    }
  }
  ns.theta.resize(sys.theta.rows(), Eigen::Index(keep.size()));
  for (Eigen::Index c = 0; c < ns.theta.cols(); ++c) {
    ns.theta.col(c) = sys.theta.col(keep[std::size_t(c)]) / ns.column_norms[std::size_t(c)];
  }
  ns.target = sys.target / ns.target_norm;
  return ns;
}

double bic_score(double mse, std::size_t n_trn, std::span<const int> ind_sel, int denom_terms) {
  if (ind_sel.empty()) throw Error(ErrorCode::invalid_argument, "bic_score needs a non-empty index set");
  if (n_trn < 2) throw Error(ErrorCode::invalid_argument, "bic_score needs n_trn >= 2");
  if (denom_terms < 1) throw Error(ErrorCode::invalid_argument, "bic_score needs a positive denominator");
  double sq = 0.0;
  for (int i : ind_sel) sq += double(i) * double(i);
  const double d = denom_terms;
  const double n = static_cast<double>(n_trn);
  return n * std::log(std::max(mse, 1e-300)) + (sq + d * d) / d * std::log(n);
}

namespace {

Eigen::VectorXd column_std(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mu = m.col(j).mean();
    out(j) = std::sqrt((m.col(j).array() - mu).square().mean());
  }
  return out;
}

// Row split of one random draw, reduced to the triangular factors of
// [theta | target] on its training and validation halves. Least squares on
// any column subset only needs these small factors.
struct SplitFactors {
  Eigen::MatrixXd r_trn;
  Eigen::MatrixXd r_val;
  std::size_t n_trn = 0;
  std::size_t n_val = 0;
  double ref_mse = 0.0;
};

Eigen::MatrixXd triangular_factor(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::Index k = std::min(a.rows(), a.cols());
  return qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

SplitFactors split_factors(const NormalizedSystem& sys, double train_fraction, std::uint64_t seed, std::size_t split) {
  const std::size_t g = static_cast<std::size_t>(sys.group_size);
  const std::size_t groups = static_cast<std::size_t>(sys.theta.rows()) / g;
  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, split);
  for (std::size_t i = groups; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::size_t n_groups_trn = static_cast<std::size_t>(std::lround(train_fraction * double(groups)));
  n_groups_trn = std::clamp<std::size_t>(n_groups_trn, 1, groups - 1);

  const Eigen::Index n = sys.theta.cols();
  auto gather = [&](std::size_t begin, std::size_t end) {
    Eigen::MatrixXd a((end - begin) * g, n + 1);
    Eigen::Index r = 0;
    for (std::size_t k = begin; k < end; ++k) {
      for (std::size_t s = 0; s < g; ++s, ++r) {
        const Eigen::Index src = Eigen::Index(order[k] * g + s);
        a.row(r).head(n) = sys.theta.row(src);
        a(r, n) = sys.target(src);
      }
    }
    return a;
  };
  SplitFactors f;
  const Eigen::MatrixXd trn = gather(0, n_groups_trn);
  const Eigen::MatrixXd val = gather(n_groups_trn, groups);
  f.n_trn = std::size_t(trn.rows());
  f.n_val = std::size_t(val.rows());
  f.ref_mse = val.col(n).squaredNorm() / double(f.n_val);
  f.r_trn = triangular_factor(trn);
  f.r_val = triangular_factor(val);
  return f;
}

constexpr double kNegligibleColumn = 1e-10;

struct SubsetFit {
  double mse = 0.0;
  bool rank_deficient = false;
};

SubsetFit fit_subset(const SplitFactors& f, std::span<const Eigen::Index> cols) {
  const Eigen::Index n = f.r_trn.cols() - 1;
  SubsetFit out;
  Eigen::VectorXd resid = -f.r_val.col(n);
  // Columns are unit-norm over all rows, so a training part this small is
  // round-off (e.g. the constant term away from the zero mode in Fourier
  // space). It gets coefficient zero instead of a huge min-norm weight.
  std::vector<Eigen::Index> live;
  for (Eigen::Index c : cols) {
    if (f.r_trn.col(c).norm() > kNegligibleColumn) {
      live.push_back(c);
    } else {
      out.rank_deficient = true;
    }
  }
  if (!live.empty()) {
    Eigen::MatrixXd a(f.r_trn.rows(), Eigen::Index(live.size()));
    Eigen::MatrixXd v(f.r_val.rows(), Eigen::Index(live.size()));
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      a.col(j) = f.r_trn.col(live[std::size_t(j)]);
      v.col(j) = f.r_val.col(live[std::size_t(j)]);
    }
    const LeastSquares ls = lstsq(a, f.r_trn.col(n));
    out.rank_deficient = out.rank_deficient || ls.rank_deficient;
    resid += v * ls.coefficients;
  }
  out.mse = resid.squaredNorm() / double(f.n_val);
  return out;
}

// Shared driver: for every split and every candidate column, `subset(j)`
// gives the active-column set to fit and `indices(j)` the library indices
// entering the BIC penalty.
template <class SubsetFn, class IndexFn>
ScreeningResult run_screen(const NormalizedSystem& sys, const SelectionConfig& cfg, ScreenMode mode, SubsetFn subset,
                           IndexFn indices, int denom) {
  cfg.validate();
  const Eigen::Index n = sys.theta.cols();
  if (sys.theta.rows() < 2 * sys.group_size) {
    throw Error(ErrorCode::invalid_argument, "too few rows to split");
  }
  ScreeningResult sr;
  sr.mode = mode;
  sr.eps_reg.resize(cfg.n_val, n);
  sr.eps_bic.resize(cfg.n_val, n);
  for (const auto& t : sys.terms) sr.column_index.push_back(t.index);
  std::vector<double> ref_reg(std::size_t(cfg.n_val)), ref_bic(std::size_t(cfg.n_val));
  std::vector<char> deficient(std::size_t(cfg.n_val), 0);
  std::vector<std::size_t> n_trn(std::size_t(cfg.n_val));

  std::vector<int> all_indices(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 0; j < n; ++j) all_indices[std::size_t(j)] = sys.terms[std::size_t(j)].index;

  parallel_for(std::size_t(cfg.n_val), [&](std::size_t i) {
    const SplitFactors f = split_factors(sys, cfg.split, cfg.seed, i);
    n_trn[i] = f.n_trn;
    ref_reg[i] = std::sqrt(f.ref_mse);
    ref_bic[i] = bic_score(f.ref_mse, f.n_trn, all_indices, int(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::vector<Eigen::Index> cols = subset(j);
      const SubsetFit fit = fit_subset(f, cols);
      if (fit.rank_deficient) deficient[i] = 1;
      const std::vector<int> ind = indices(j);
      sr.eps_reg(Eigen::Index(i), j) = std::sqrt(fit.mse);
      sr.eps_bic(Eigen::Index(i), j) = bic_score(fit.mse, f.n_trn, ind, denom);
    }
  });
  // ordered reductions keep the result independent of the worker count
  for (std::size_t i = 0; i < ref_reg.size(); ++i) {
    sr.eps_reg_ref += ref_reg[i];
    sr.eps_bic_ref += ref_bic[i];
    sr.rank_deficient = sr.rank_deficient || deficient[i];
  }
  sr.eps_reg_ref /= double(cfg.n_val);
  sr.eps_bic_ref /= double(cfg.n_val);
  sr.n_trn = n_trn.front();
  return sr;
}

}  // namespace

Eigen::VectorXd ScreeningResult::std_reg() const { return column_std(eps_reg); }
Eigen::VectorXd ScreeningResult::std_bic() const { return column_std(eps_bic); }

ScreeningResult drop_one_screen(const NormalizedSystem& sys, const SelectionConfig& cfg) {
  const Eigen::Index n = sys.theta.cols();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "drop-one screening needs at least two columns");
  auto subset = [n](Eigen::Index j) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != j) cols.push_back(c);
    }
    return cols;
  };
  auto indices = [&sys, n](Eigen::Index j) {
    std::vector<int> ind;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != j) ind.push_back(sys.terms[std::size_t(c)].index);
    }
    return ind;
  };
  return run_screen(sys, cfg, ScreenMode::drop_one, subset, indices, int(n) - 1);
}

ScreeningResult add_one_screen(const NormalizedSystem& sys, std::span<const int> i0, const SelectionConfig& cfg) {
  if (i0.empty()) throw Error(ErrorCode::invalid_argument, "add-one screening needs a non-empty I0");
  std::vector<Eigen::Index> base;
  for (int idx : i0) {
    const int c = sys.column_of(idx);
    if (c < 0) throw Error(ErrorCode::invalid_argument, "I0 index " + std::to_string(idx) + " is not an active column");
    base.push_back(c);
  }
  auto subset = [&base](Eigen::Index j) {
    std::vector<Eigen::Index> cols = base;
    if (std::find(cols.begin(), cols.end(), j) == cols.end()) cols.push_back(j);
    std::sort(cols.begin(), cols.end());
    return cols;
  };
  auto indices = [&sys, &subset](Eigen::Index j) {
    std::vector<int> ind;
    for (Eigen::Index c : subset(j)) ind.push_back(sys.terms[std::size_t(c)].index);
    return ind;
  };
  ScreeningResult sr = run_screen(sys, cfg, ScreenMode::add_one, subset, indices, int(base.size()) + 1);
  sr.i0.assign(i0.begin(), i0.end());
  std::sort(sr.i0.begin(), sr.i0.end());
  return sr;
}

TermChoice choose_terms(const ScreeningResult& sr, const SelectionConfig& cfg) {
  const Eigen::VectorXd mean = sr.mean_reg();
  const Eigen::VectorXd sd = sr.std_reg();
  const bool drop = sr.mode == ScreenMode::drop_one;
  const auto in_i0 = [&](Eigen::Index j) {
    return std::find(sr.i0.begin(), sr.i0.end(), sr.column_index[std::size_t(j)]) != sr.i0.end();
  };
  // error of the current model, reproduced by any candidate already in I0
  double base = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    if (!drop && in_i0(j)) base = std::min(base, mean(j));
  }

  Eigen::Index best = -1;
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    if (best < 0 || (drop ? mean(j) > mean(best) : mean(j) < mean(best))) best = j;
  }
  TermChoice out;
  out.main = sr.column_index[std::size_t(best)];
  if (!drop && in_i0(best)) return out;  // nothing improves on the current model

  std::vector<Eigen::Index> ties;
  const double scale = std::abs(mean(best));
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    if (!drop && (in_i0(j) || !(mean(j) < base))) continue;
    const double gap = std::abs(mean(j) - mean(best));
    const double pooled = std::sqrt(0.5 * (sd(j) * sd(j) + sd(best) * sd(best)));
    if (j == best || (gap <= cfg.branch_tolerance * scale && gap <= pooled)) ties.push_back(j);
  }
  std::vector<int> idx;
  for (Eigen::Index j : ties) idx.push_back(sr.column_index[std::size_t(j)]);
  std::sort(idx.begin(), idx.end());
  out.main = idx.front();
  out.alternates.assign(idx.begin() + 1, idx.end());
  return out;
}

namespace {

double spread(const Eigen::VectorXd& v) { return std::sqrt((v.array() - v.mean()).square().mean()); }

SelectionStep record(const ScreeningResult& sr, int branch, int step, std::span<const int> base) {
  SelectionStep s;
  s.branch = branch;
  s.step = step;
  s.mode = sr.mode;
  s.base.assign(base.begin(), base.end());
  s.column_index = sr.column_index;
  const auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const Eigen::VectorXd mr = sr.mean_reg(), mb = sr.mean_bic();
  s.mean_reg = to_vec(mr);
  s.std_reg = to_vec(sr.std_reg());
  s.mean_bic = to_vec(mb);
  s.std_bic = to_vec(sr.std_bic());
  s.ref_reg = sr.eps_reg_ref;
  s.ref_bic = sr.eps_bic_ref;
  s.spread_reg = spread(mr);
  s.spread_bic = spread(mb);
  return s;
}

std::vector<int> with(std::vector<int> s, std::span<const int> extra) {
  s.insert(s.end(), extra.begin(), extra.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

SelectionTrace psi_select(const RegressionSystem& sys, const SelectionConfig& cfg) {
  cfg.validate();
  const NormalizedSystem ns = normalize_system(sys);
  SelectionTrace trace;
  trace.config = cfg;
  trace.dropped_columns = ns.dropped;
  trace.library_size = ns.library_size;

  const ScreeningResult seed_screen = drop_one_screen(ns, cfg);
  trace.rank_deficient = seed_screen.rank_deficient;
  const TermChoice first = choose_terms(seed_screen, cfg);
  SelectionStep s0 = record(seed_screen, 0, 0, {});
  s0.chosen = {first.main};
  s0.alternates = first.alternates;
  s0.outcome = "seed";
  trace.steps.push_back(std::move(s0));

  struct Pending {
    int id;
    int parent;
    std::vector<int> support;
  };
  std::vector<Pending> queue;
  std::set<std::vector<int>> seen;  // every support reached by any branch
  auto spawn = [&](int parent, std::vector<int> support) {
    if (static_cast<int>(queue.size()) >= cfg.max_branches || !seen.insert(support).second) return;
    const int id = static_cast<int>(queue.size());
    queue.push_back({id, parent, std::move(support)});
  };
  spawn(-1, {first.main});
  for (int alt : first.alternates) spawn(0, {alt});

  for (std::size_t q = 0; q < queue.size(); ++q) {
    Pending b = queue[q];
    std::string reason;
    for (int step = 1;; ++step) {
      if (static_cast<int>(b.support.size()) >= cfg.max_terms || b.support.size() >= std::size_t(ns.theta.cols())) {
        reason = "max_terms";
        break;
      }
      const ScreeningResult sr = add_one_screen(ns, b.support, cfg);
      trace.rank_deficient = trace.rank_deficient || sr.rank_deficient;
      SelectionStep st = record(sr, b.id, step, b.support);
      const bool flat_reg = st.spread_reg <= cfg.gamma_reg * sr.eps_reg_ref;
      const bool flat_bic = st.spread_bic <= cfg.gamma_bic * std::abs(sr.eps_bic_ref);
      const bool flat = cfg.stop_rule == StopRule::either ? (flat_reg || flat_bic) : (flat_reg && flat_bic);
      const TermChoice ch = choose_terms(sr, cfg);
      const Eigen::VectorXd mb = sr.mean_bic();
      Eigen::Index best_bic = 0;
      mb.minCoeff(&best_bic);
      const auto in_support = [&](int idx) {
        return std::find(b.support.begin(), b.support.end(), idx) != b.support.end();
      };
      if (flat) {
        reason = "plateau";
      } else if (in_support(ch.main)) {
        reason = "no_improvement";
      } else if (in_support(sr.column_index[std::size_t(best_bic)])) {
        reason = "bic_minimum";
      }
      if (!reason.empty()) {
        st.outcome = reason;
        trace.steps.push_back(std::move(st));
        break;
      }
      st.chosen = {ch.main};
      st.alternates = ch.alternates;
      st.outcome = "add";
      trace.steps.push_back(std::move(st));
      for (int alt : ch.alternates) spawn(b.id, with(b.support, std::array{alt}));
      if (!ch.alternates.empty()) {
        std::vector<int> all{ch.main};
        all.insert(all.end(), ch.alternates.begin(), ch.alternates.end());
        spawn(b.id, with(b.support, all));
      }
      b.support = with(b.support, std::array{ch.main});
      if (!seen.insert(b.support).second) {
        reason = "merged";
        break;
      }
    }
    SelectionBranch out;
    out.id = b.id;
    out.parent = b.parent;
    out.support = b.support;
    for (int idx : b.support) out.terms.push_back(ns.terms[std::size_t(ns.column_of(idx))]);
    out.coefficients = ns.fit(b.support);
    out.stop_reason = reason;
    trace.branches.push_back(std::move(out));
  }
  std::sort(trace.branches.begin(), trace.branches.end(),
            [](const SelectionBranch& a, const SelectionBranch& b) { return a.id < b.id; });
  return trace;
}

}  // namespace psipde
