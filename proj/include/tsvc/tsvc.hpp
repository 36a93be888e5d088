#ifndef TSVC_TSVC_HPP
#define TSVC_TSVC_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "tsvc/dataset.hpp"
#include "tsvc/glm.hpp"
#include "tsvc/tree.hpp"

namespace tsvc {

/// Role of a covariate in the model.
///  - vary: has a linear effect that may be split by its allowed modifiers.
///  - fixed_effect: has a linear effect that is never split.
///  - modifier_only: no own effect; usable only inside other trees' rules.
enum class Role { vary, fixed_effect, modifier_only };

struct TsvcConfig {
  Family family = Family::gaussian();
  int max_splits = 5;
  int min_node_size = 5;
  std::vector<Role> roles;                       // one per covariate
  std::vector<std::vector<int>> modifier_sets;   // allowed modifiers per covariate

  /// Every covariate varying, every other covariate an allowed modifier.
  static TsvcConfig defaults(Eigen::Index p, Family family);

  void validate(Eigen::Index p) const;

  bool has_coefficient(int j) const {
    return roles[static_cast<std::size_t>(j)] != Role::modifier_only;
  }

  std::vector<int> vary_set() const;
  std::vector<int> fixed_effects() const;
  std::vector<int> modifier_only() const;
};

/// Fitted tree-structured varying coefficient model.
struct TsvcModel {
  ModelStructure structure;
  TsvcConfig config;
  std::vector<ColumnMeta> columns;

  double intercept = 0.0;
  double intercept_se = 0.0;
  std::vector<std::vector<double>> coefficients;     // [j][leaf]; empty if modifier-only
  std::vector<std::vector<double>> standard_errors;  // same shape
  double residual_variance = 0.0;                    // gaussian only, NaN otherwise

  GlmFit fit;
  double bic = 0.0;
  int splits_performed = 0;
  Eigen::Index n_train = 0;
  int skipped_candidates = 0;  // degenerate/non-converged candidate refits along the path

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd fitted_mean(const Eigen::MatrixXd& rows) const;

  /// beta_j at the leaf containing row `i` of `rows`; errors for modifier-only j.
  double varying_coefficient(int j, const Eigen::MatrixXd& rows, Eigen::Index i) const;

  /// Design column of coefficient (j, leaf), counting the intercept at 0.
  Eigen::Index column_of(int j, int leaf) const;
};

/// Structured design matrix: intercept column, then per covariate with a
/// coefficient role one column x_j * I(row in leaf m) per leaf. An original
/// leaf empty on this dataset raises (degenerate design).
Eigen::MatrixXd build_design(const Eigen::MatrixXd& covariates,
                             const ModelStructure& structure, const TsvcConfig& config);
Eigen::MatrixXd build_design(const Dataset& data, const ModelStructure& structure,
                             const TsvcConfig& config);

struct CandidateSplit {
  SplitRule rule;
  int leaf = 0;
};

/// All admissible one-step extensions of `structure`, in ascending
/// (covariate, leaf, modifier, threshold) order. Thresholds are the distinct
/// observed modifier values inside the leaf, excluding the leaf maximum, and
/// both children must keep at least min_node_size observations.
std::vector<CandidateSplit> enumerate_candidate_splits(const Dataset& data,
                                                       const ModelStructure& structure,
                                                       const TsvcConfig& config);

struct SplitSelection {
  SplitRule rule;
  int leaf = 0;
  GlmFit fit;            // full refit with the split applied
  int skipped = 0;       // candidates dropped for rank deficiency / non-convergence
};

/// Refits one GLM per candidate and returns the deviance-minimizing split,
/// ties broken by enumeration order; nullopt when no candidate exists.
std::optional<SplitSelection> select_best_split(const Dataset& data,
                                                const ModelStructure& structure,
                                                const TsvcConfig& config);

/// BIC with the split-count penalty: -2 log L + s log n.
double bic(double log_likelihood, int splits, Eigen::Index n);

/// Nested model sequence for s = 0..max_splits, each fitted on the full data;
/// stops early when no admissible candidate remains.
std::vector<TsvcModel> grow_sequence(const Dataset& data, const TsvcConfig& config);

/// Grows the sequence and prunes it where the BIC stops improving.
TsvcModel fit_tsvc(const Dataset& data, const TsvcConfig& config);

}  // namespace tsvc

#endif
