#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psipde/linalg.hpp"

namespace psipde {

// When the add-one loop may stop: once either spread is within its
// tolerance, or only once both are.
enum class StopRule { either, both };
const char* to_string(StopRule r);
StopRule parse_stop_rule(const std::string& name);

struct SelectionConfig {
  int n_val = 500;
  double split = 0.8;
  double gamma_reg = 0.01;
  double gamma_bic = 0.01;
  std::uint64_t seed = 0;
  // Relative gap to the best mean error within which a term counts as a tie.
  double branch_tolerance = 0.15;
  int max_terms = 6;
  int max_branches = 4;
  StopRule stop_rule = StopRule::either;

  void validate() const;
};

// Columns and target scaled to unit L2 norm. Zero columns are removed; the
// surviving terms keep their library index.
struct NormalizedSystem {
  Eigen::MatrixXd theta;
  Eigen::VectorXd target;
  std::vector<TermSpec> terms;
  std::vector<double> column_norms;
  double target_norm = 1.0;
  std::vector<int> dropped;
  int group_size = 1;
  int library_size = 0;

  // Position of a library index among the active columns, or -1.
  int column_of(int library_index) const;
  // Least squares on the full system restricted to `support` (library
  // indices), reported in original units.
  Eigen::VectorXd fit(std::span<const int> support) const;
};

NormalizedSystem normalize_system(const RegressionSystem& sys);

// n_trn log(mse) + (sum(ind^2) + denom^2) / denom * log(n_trn).
double bic_score(double mse, std::size_t n_trn, std::span<const int> ind_sel, int denom_terms);

enum class ScreenMode { drop_one, add_one };
const char* to_string(ScreenMode m);

struct ScreeningResult {
  ScreenMode mode = ScreenMode::drop_one;
  Eigen::MatrixXd eps_reg;  // n_val x N
  Eigen::MatrixXd eps_bic;
  double eps_reg_ref = 0.0;
  double eps_bic_ref = 0.0;
  std::vector<int> i0;            // library indices selected before this screen
  std::vector<int> column_index;  // library index of each column
  std::size_t n_trn = 0;
  bool rank_deficient = false;

  Eigen::VectorXd mean_reg() const { return eps_reg.colwise().mean(); }
  Eigen::VectorXd mean_bic() const { return eps_bic.colwise().mean(); }
  Eigen::VectorXd std_reg() const;
  Eigen::VectorXd std_bic() const;
};

ScreeningResult drop_one_screen(const NormalizedSystem& sys, const SelectionConfig& cfg);
ScreeningResult add_one_screen(const NormalizedSystem& sys, std::span<const int> i0, const SelectionConfig& cfg);

struct TermChoice {
  int main = 0;                 // library index
  std::vector<int> alternates;  // statistically tied runners-up
};

TermChoice choose_terms(const ScreeningResult& sr, const SelectionConfig& cfg);

struct SelectionStep {
  int branch = 0;
  int step = 0;
  ScreenMode mode = ScreenMode::drop_one;
  std::vector<int> base;
  std::vector<int> column_index;
  std::vector<double> mean_reg, std_reg, mean_bic, std_bic;
  double ref_reg = 0.0;
  double ref_bic = 0.0;
  double spread_reg = 0.0;
  double spread_bic = 0.0;
  std::vector<int> chosen;
  std::vector<int> alternates;
  std::string outcome;  // "seed", "add" or the stop reason
};

struct SelectionBranch {
  int id = 0;
  int parent = -1;
  std::vector<int> support;
  std::vector<TermSpec> terms;
  Eigen::VectorXd coefficients;  // original units, aligned with support
  std::string stop_reason;
};

struct SelectionTrace {
  SelectionConfig config;
  std::vector<SelectionStep> steps;
  std::vector<SelectionBranch> branches;  // branches[0] is the main branch
  std::vector<int> dropped_columns;
  bool rank_deficient = false;
  int library_size = 0;
};

SelectionTrace psi_select(const RegressionSystem& sys, const SelectionConfig& cfg);

}  // namespace psipde
