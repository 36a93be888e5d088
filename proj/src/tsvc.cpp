#include "tsvc/tsvc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "tsvc/errors.hpp"

namespace tsvc {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<int> sorted_modifiers(const TsvcConfig& config, int j) {
  std::vector<int> mods = config.modifier_sets[static_cast<std::size_t>(j)];
  std::sort(mods.begin(), mods.end());
  mods.erase(std::unique(mods.begin(), mods.end()), mods.end());
  return mods;
}

std::vector<std::vector<int>> leaf_members(const PartitionTree& tree,
                                           const Eigen::MatrixXd& x) {
  std::vector<std::vector<int>> members(static_cast<std::size_t>(tree.leaf_count()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    members[static_cast<std::size_t>(tree.assign(x, i))].push_back(static_cast<int>(i));
  }
  return members;
}

struct ColumnLayout {
  std::vector<Eigen::Index> offset;  // column of (j, leaf 0); -1 for modifier-only
  Eigen::Index q = 1;
};

ColumnLayout layout_for(const ModelStructure& structure, const TsvcConfig& config) {
  ColumnLayout layout;
  layout.offset.assign(structure.trees.size(), -1);
  for (std::size_t j = 0; j < structure.trees.size(); ++j) {
    if (!config.has_coefficient(static_cast<int>(j))) continue;
    layout.offset[j] = layout.q;
    layout.q += structure.trees[j].leaf_count();
  }
  return layout;
}

/// Iterates admissible candidate splits in ascending (j, leaf, k, threshold)
/// order. `on_group` starts a (j, leaf, k) sweep over the leaf's members;
/// `on_advance` moves the rows of the next distinct modifier value to the
/// left child; `on_candidate` fires when both children hold min_node_size.
/// Both the enumerator and the split search run on this single walk, so the
/// candidate set and order cannot drift apart between them.
template <class OnGroup, class OnAdvance, class OnCandidate>
void walk_candidates(const Eigen::MatrixXd& x, const ModelStructure& structure,
                     const TsvcConfig& config, OnGroup&& on_group,
                     OnAdvance&& on_advance, OnCandidate&& on_candidate) {
  const int p = static_cast<int>(x.cols());
  const std::size_t min_node = static_cast<std::size_t>(config.min_node_size);
  std::vector<std::pair<double, int>> order;  // (modifier value, row)
  for (int j = 0; j < p; ++j) {
    if (config.roles[static_cast<std::size_t>(j)] != Role::vary) continue;
    const PartitionTree& tree = structure.trees[static_cast<std::size_t>(j)];
    const auto members = leaf_members(tree, x);
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      const auto& rows = members[static_cast<std::size_t>(leaf)];
      if (rows.size() < 2 * min_node) continue;
      for (int k : sorted_modifiers(config, j)) {
        order.clear();
        for (int r : rows) order.emplace_back(x(r, k), r);
        std::sort(order.begin(), order.end());
        on_group(j, leaf, k);
        std::size_t i = 0, left = 0;
        while (i < order.size()) {
          std::size_t end = i + 1;
          while (end < order.size() && order[end].first == order[i].first) ++end;
          if (end == order.size()) break;  // leaf maximum is not a threshold
          on_advance(order.data() + i, order.data() + end);
          left = end;
          if (left >= min_node && order.size() - left >= min_node) {
            on_candidate(j, leaf, k, order[i].first);
          }
          i = end;
        }
      }
    }
  }
}

struct ScoredCandidate {
  double deviance;
  long order;
  SplitRule rule;
  int leaf;
};

/// Least-squares deviance of every candidate via incremental Gram updates:
/// splitting column a into disjoint parts u and v only changes one row/column
/// block of the normal equations, so each candidate costs O(q^2) instead of a
/// full refit.
void scan_candidates_gaussian(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& design,
                              const ModelStructure& structure, const TsvcConfig& config,
                              const ColumnLayout& layout,
                              std::vector<ScoredCandidate>& out, int& skipped) {
  const Eigen::Index q = design.cols();
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd xty = design.transpose() * y;
  const double yty = y.squaredNorm();
  const RowMajorMatrix rows = design;

  Eigen::VectorXd left_cross(q);  // X^T u for the current sweep
  double left_xty = 0.0;
  Eigen::Index col_a = 0;

  Eigen::MatrixXd system(q + 1, q + 1);
  Eigen::VectorXd rhs(q + 1), solution(q + 1);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(q + 1);

  long order = 0;
  walk_candidates(
      x, structure, config,
      [&](int j, int leaf, int /*k*/) {
        left_cross.setZero();
        left_xty = 0.0;
        col_a = layout.offset[static_cast<std::size_t>(j)] + leaf;
      },
      [&](const std::pair<double, int>* begin, const std::pair<double, int>* end) {
        for (auto* it = begin; it != end; ++it) {
          const int r = it->second;
          const double w = design(r, col_a);
          if (w != 0.0) {
            left_cross.noalias() += w * rows.row(r).transpose();
            left_xty += w * y(r);
          }
        }
      },
      [&](int j, int leaf, int k, double threshold) {
        const long my_order = order++;
        system.topLeftCorner(q, q) = gram;
        system.row(col_a).head(q) = left_cross.transpose();
        system.col(col_a).head(q) = left_cross;
        system.col(q).head(q) = gram.col(col_a) - left_cross;
        system(col_a, q) = 0.0;
        system.row(q).head(q) = system.col(q).head(q).transpose();
        system(q, q) = gram(col_a, col_a) - left_cross(col_a);
        rhs.head(q) = xty;
        rhs(col_a) = left_xty;
        rhs(q) = xty(col_a) - left_xty;

        ldlt.compute(system);
        const auto& d = ldlt.vectorD();
        const double d_max = d.maxCoeff();
        if (!(d.minCoeff() > 1e-12 * d_max) || !(d_max > 0.0)) {
          ++skipped;
          return;
        }
        solution = ldlt.solve(rhs);
        const double rss = std::max(yty - solution.dot(rhs), 0.0);
        out.push_back({rss, my_order, SplitRule{j, k, threshold}, leaf});
      });
}

/// IRLS deviance on an explicitly assembled candidate design; returns nothing
/// for rank-deficient or non-converged fits (those candidates are skipped).
std::optional<double> light_logistic_deviance(const RowMajorMatrix& design,
                                              const Eigen::VectorXd& y,
                                              const IrlsOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 0.5);
  Eigen::MatrixXd gram(q, q);
  Eigen::VectorXd rhs(q), beta(q);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(q);

  double deviance = binomial_deviance(y, mu);
  for (int it = 0; it < options.max_iterations; ++it) {
    gram.setZero();
    rhs.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
      const double z = eta(i) + (y(i) - mu(i)) / w;
      gram.selfadjointView<Eigen::Lower>().rankUpdate(design.row(i).transpose(), w);
      rhs.noalias() += (w * z) * design.row(i).transpose();
    }
    gram.triangularView<Eigen::Upper>() = gram.transpose();
    ldlt.compute(gram);
    const auto& d = ldlt.vectorD();
    if (!(d.minCoeff() > 1e-12 * d.maxCoeff()) || !(d.maxCoeff() > 0.0)) {
      return std::nullopt;
    }
    beta = ldlt.solve(rhs);
    eta.noalias() = design * beta;
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = inverse_logit(eta(i));
    const double next = binomial_deviance(y, mu);
    const double change = std::fabs(next - deviance) / (0.1 + std::fabs(next));
    deviance = next;
    if (change < options.tolerance) {
      if (eta.lpNorm<Eigen::Infinity>() > 30.0) return std::nullopt;  // quasi-separated
      return deviance;
    }
  }
  return std::nullopt;
}

void scan_candidates_binomial(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& design,
                              const ModelStructure& structure, const TsvcConfig& config,
                              const ColumnLayout& layout,
                              std::vector<ScoredCandidate>& out, int& skipped) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  RowMajorMatrix candidate(n, q + 1);
  candidate.leftCols(q) = design;
  candidate.col(q).setZero();
  Eigen::Index col_a = 0;

  long order = 0;
  walk_candidates(
      x, structure, config,
      [&](int j, int leaf, int /*k*/) {
        // Reset: left part empty, right part carries the whole leaf column.
        candidate.col(col_a) = design.col(col_a);
        col_a = layout.offset[static_cast<std::size_t>(j)] + leaf;
        candidate.col(q) = design.col(col_a);
        candidate.col(col_a).setZero();
      },
      [&](const std::pair<double, int>* begin, const std::pair<double, int>* end) {
        for (auto* it = begin; it != end; ++it) {
          const int r = it->second;
          candidate(r, col_a) = design(r, col_a);
          candidate(r, q) = 0.0;
        }
      },
      [&](int j, int leaf, int k, double threshold) {
        const long my_order = order++;
        if (auto deviance = light_logistic_deviance(candidate, y, IrlsOptions{})) {
          out.push_back({*deviance, my_order, SplitRule{j, k, threshold}, leaf});
        } else {
          ++skipped;
        }
      });
}

TsvcModel make_model(const Dataset& data, ModelStructure structure,
                     const TsvcConfig& config, GlmFit fit, int skipped) {
  const ColumnLayout layout = layout_for(structure, config);
  TsvcModel model;
  model.structure = std::move(structure);
  model.config = config;
  model.columns = data.columns();
  model.n_train = data.n();
  model.intercept = fit.coefficients(0);
  model.intercept_se = fit.standard_error(0);
  model.coefficients.resize(static_cast<std::size_t>(data.p()));
  model.standard_errors.resize(static_cast<std::size_t>(data.p()));
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const Eigen::Index offset = layout.offset[static_cast<std::size_t>(j)];
    if (offset < 0) continue;
    const int leaves = model.structure.trees[static_cast<std::size_t>(j)].leaf_count();
    auto& coefs = model.coefficients[static_cast<std::size_t>(j)];
    auto& ses = model.standard_errors[static_cast<std::size_t>(j)];
    for (int m = 0; m < leaves; ++m) {
      coefs.push_back(fit.coefficients(offset + m));
      ses.push_back(fit.standard_error(offset + m));
    }
  }
  model.splits_performed = model.structure.total_splits();
  model.bic = bic(fit.log_likelihood, model.splits_performed, data.n());
  if (config.family.is_gaussian() && data.n() > layout.q) {
    model.residual_variance = residual_variance(fit, data.n(), layout.q);
  } else {
    model.residual_variance = std::numeric_limits<double>::quiet_NaN();
  }
  model.fit = std::move(fit);
  model.skipped_candidates = skipped;
  return model;
}

}  // namespace

TsvcConfig TsvcConfig::defaults(Eigen::Index p, Family family) {
  TsvcConfig config;
  config.family = family;
  config.roles.assign(static_cast<std::size_t>(p), Role::vary);
  config.modifier_sets.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) config.modifier_sets[static_cast<std::size_t>(j)].push_back(static_cast<int>(k));
    }
  }
  return config;
}

void TsvcConfig::validate(Eigen::Index p) const {
  if (max_splits < 0) throw ConfigError("max_splits must be >= 0");
  if (min_node_size < 1) throw ConfigError("min_node_size must be >= 1");
  if (static_cast<Eigen::Index>(roles.size()) != p) {
    throw ConfigError("roles must name every covariate exactly once");
  }
  if (static_cast<Eigen::Index>(modifier_sets.size()) != p) {
    throw ConfigError("modifier_sets must have one entry per covariate");
  }
  bool any_coefficient = false;
  for (std::size_t j = 0; j < roles.size(); ++j) {
    if (roles[j] != Role::modifier_only) any_coefficient = true;
    for (int k : modifier_sets[j]) {
      if (k < 0 || k >= p) throw ConfigError("modifier index out of range");
      if (k == static_cast<int>(j)) {
        throw ConfigError("covariate " + std::to_string(j) + " cannot modify itself");
      }
    }
  }
  if (!any_coefficient) throw ConfigError("model needs at least one coefficient");
}

std::vector<int> TsvcConfig::vary_set() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < roles.size(); ++j) {
    if (roles[j] == Role::vary) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> TsvcConfig::fixed_effects() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < roles.size(); ++j) {
    if (roles[j] == Role::fixed_effect) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> TsvcConfig::modifier_only() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < roles.size(); ++j) {
    if (roles[j] == Role::modifier_only) out.push_back(static_cast<int>(j));
  }
  return out;
}

Eigen::MatrixXd build_design(const Eigen::MatrixXd& covariates,
                             const ModelStructure& structure, const TsvcConfig& config) {
  if (static_cast<Eigen::Index>(structure.trees.size()) != covariates.cols()) {
    throw InvalidInput("structure covariates do not match dataset columns");
  }
  const ColumnLayout layout = layout_for(structure, config);
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(covariates.rows(), layout.q);
  design.col(0).setOnes();
  std::vector<int> counts;
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
    const Eigen::Index offset = layout.offset[static_cast<std::size_t>(j)];
    if (offset < 0) continue;
    const PartitionTree& tree = structure.trees[static_cast<std::size_t>(j)];
    counts.assign(static_cast<std::size_t>(tree.leaf_count()), 0);
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      const int leaf = tree.assign(covariates, i);
      ++counts[static_cast<std::size_t>(leaf)];
      design(i, offset + leaf) = covariates(i, j);
    }
    for (std::size_t m = 0; m < counts.size(); ++m) {
      if (counts[m] == 0) {
        throw InvalidInput("degenerate design: partition " + std::to_string(m + 1) +
                           " of covariate " + std::to_string(j + 1) +
                           " is empty on this dataset");
      }
    }
  }
  return design;
}

Eigen::MatrixXd build_design(const Dataset& data, const ModelStructure& structure,
                             const TsvcConfig& config) {
  return build_design(data.covariates(), structure, config);
}

std::vector<CandidateSplit> enumerate_candidate_splits(const Dataset& data,
                                                       const ModelStructure& structure,
                                                       const TsvcConfig& config) {
  config.validate(data.p());
  std::vector<CandidateSplit> out;
  walk_candidates(
      data.covariates(), structure, config, [](int, int, int) {},
      [](const std::pair<double, int>*, const std::pair<double, int>*) {},
      [&](int j, int leaf, int k, double threshold) {
        out.push_back({SplitRule{j, k, threshold}, leaf});
      });
  return out;
}

std::optional<SplitSelection> select_best_split(const Dataset& data,
                                                const ModelStructure& structure,
                                                const TsvcConfig& config) {
  config.validate(data.p());
  const ColumnLayout layout = layout_for(structure, config);
  const Eigen::MatrixXd design = build_design(data, structure, config);

  std::vector<ScoredCandidate> scored;
  int skipped = 0;
  if (config.family.is_gaussian()) {
    scan_candidates_gaussian(data.covariates(), data.outcome(), design, structure,
                             config, layout, scored, skipped);
  } else {
    scan_candidates_binomial(data.covariates(), data.outcome(), design, structure,
                             config, layout, scored, skipped);
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    return a.deviance != b.deviance ? a.deviance < b.deviance : a.order < b.order;
  });

  for (const ScoredCandidate& candidate : scored) {
    ModelStructure next = structure;
    auto& tree = next.trees[static_cast<std::size_t>(candidate.rule.target_covariate)];
    tree = tree.split_leaf(candidate.leaf, candidate.rule.modifier, candidate.rule.threshold);
    try {
      GlmFit fit = fit_glm(build_design(data, next, config), data.outcome(), config.family);
      if (!fit.converged) {
        ++skipped;
        continue;
      }
      return SplitSelection{candidate.rule, candidate.leaf, std::move(fit), skipped};
    } catch (const Error&) {
      ++skipped;
    }
  }
  return std::nullopt;
}

double bic(double log_likelihood, int splits, Eigen::Index n) {
  if (n < 1) throw InvalidInput("bic requires n >= 1");
  return -2.0 * log_likelihood + static_cast<double>(splits) * std::log(static_cast<double>(n));
}

std::vector<TsvcModel> grow_sequence(const Dataset& data, const TsvcConfig& config) {
  config.validate(data.p());
  if (!config.family.is_gaussian()) {
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double y = data.outcome()(i);
      if (y != 0.0 && y != 1.0) {
        throw InvalidInput("binomial outcome must contain only 0/1 values");
      }
    }
  }

  ModelStructure structure = ModelStructure::no_splits(data.p());
  GlmFit base = fit_glm(build_design(data, structure, config), data.outcome(), config.family);
  std::vector<TsvcModel> sequence;
  sequence.push_back(make_model(data, structure, config, std::move(base), 0));

  for (int s = 1; s <= config.max_splits; ++s) {
    auto selection = select_best_split(data, structure, config);
    if (!selection) break;
    auto& tree = structure.trees[static_cast<std::size_t>(selection->rule.target_covariate)];
    tree = tree.split_leaf(selection->leaf, selection->rule.modifier,
                           selection->rule.threshold);
    sequence.push_back(make_model(data, structure, config, std::move(selection->fit),
                                  selection->skipped));
  }
  return sequence;
}

TsvcModel fit_tsvc(const Dataset& data, const TsvcConfig& config) {
  std::vector<TsvcModel> sequence = grow_sequence(data, config);
  // Prune where the BIC stops improving. Along the grown sequence the
  // per-step deviance gains hover near the log(n) penalty, so the global
  // minimum drifts into spurious splits; the first BIC increase is the
  // stopping point the split-count statistics are calibrated against.
  std::size_t best = 0;
  while (best + 1 < sequence.size() && sequence[best + 1].bic < sequence[best].bic) {
    ++best;
  }
  return std::move(sequence[best]);
}

Eigen::VectorXd TsvcModel::linear_predictor(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != static_cast<Eigen::Index>(structure.trees.size())) {
    throw InvalidInput("prediction rows have wrong number of covariates");
  }
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(rows.rows(), intercept);
  for (std::size_t j = 0; j < structure.trees.size(); ++j) {
    if (!config.has_coefficient(static_cast<int>(j))) continue;
    const PartitionTree& tree = structure.trees[j];
    const auto& coefs = coefficients[j];
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      eta(i) += coefs[static_cast<std::size_t>(tree.assign(rows, i))] *
                rows(i, static_cast<Eigen::Index>(j));
    }
  }
  return eta;
}

Eigen::VectorXd TsvcModel::fitted_mean(const Eigen::MatrixXd& rows) const {
  return mean_response(config.family, linear_predictor(rows));
}

double TsvcModel::varying_coefficient(int j, const Eigen::MatrixXd& rows,
                                      Eigen::Index i) const {
  if (!config.has_coefficient(j)) {
    throw InvalidInput("covariate " + std::to_string(j + 1) +
                       " is modifier-only and has no coefficient");
  }
  const int leaf = structure.trees[static_cast<std::size_t>(j)].assign(rows, i);
  return coefficients[static_cast<std::size_t>(j)][static_cast<std::size_t>(leaf)];
}

Eigen::Index TsvcModel::column_of(int j, int leaf) const {
  const ColumnLayout layout = layout_for(structure, config);
  const Eigen::Index offset = layout.offset[static_cast<std::size_t>(j)];
  if (offset < 0) throw InvalidInput("covariate has no design columns");
  return offset + leaf;
}

}  // namespace tsvc
