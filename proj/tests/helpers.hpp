#ifndef TSVC_TEST_HELPERS_HPP
#define TSVC_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "tsvc/dataset.hpp"
#include "tsvc/rng.hpp"
#include "tsvc/tree.hpp"
#include "tsvc/tsvc.hpp"

namespace tsvc_test {

/// Random dataset with continuous columns (optionally one binary column) and
/// a noisy linear outcome.
inline tsvc::Dataset random_dataset(tsvc::Rng& rng, Eigen::Index n, Eigen::Index p,
                                    bool last_binary = false) {
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (last_binary && j == p - 1) {
        x(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      } else {
        x(i, j) = rng.normal();
      }
    }
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) mean += 0.3 * (j + 1) * x(i, j);
    y(i) = mean + rng.normal();
  }
  std::vector<tsvc::ColumnMeta> columns;
  for (Eigen::Index j = 0; j < p; ++j) {
    tsvc::ColumnMeta meta;
    meta.name = "x" + std::to_string(j + 1);
    meta.kind = (last_binary && j == p - 1) ? tsvc::ColumnKind::binary
                                            : tsvc::ColumnKind::continuous;
    columns.push_back(meta);
  }
  return tsvc::Dataset(std::move(y), std::move(x), std::move(columns));
}

/// Independent least-squares residual sum of squares via SVD; returns nothing
/// for rank-deficient designs.
inline std::optional<double> oracle_rss(const Eigen::MatrixXd& design,
                                        const Eigen::VectorXd& y) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-10 * sv(0)) return std::nullopt;
  const Eigen::VectorXd beta = svd.solve(y);
  return (y - design * beta).squaredNorm();
}

/// Direct re-statement of the candidate rules: every vary covariate, every
/// leaf, every allowed modifier, thresholds at distinct observed values in
/// the leaf excluding the maximum, both children >= min_node_size.
struct OracleCandidate {
  int covariate;
  int leaf;
  int modifier;
  double threshold;
};

inline std::vector<OracleCandidate> oracle_candidates(const tsvc::Dataset& data,
                                                      const tsvc::ModelStructure& structure,
                                                      const tsvc::TsvcConfig& config) {
  std::vector<OracleCandidate> out;
  const Eigen::MatrixXd& x = data.covariates();
  for (int j = 0; j < static_cast<int>(data.p()); ++j) {
    if (config.roles[static_cast<std::size_t>(j)] != tsvc::Role::vary) continue;
    const tsvc::PartitionTree& tree = structure.trees[static_cast<std::size_t>(j)];
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      std::vector<Eigen::Index> members;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (tree.assign(x, i) == leaf) members.push_back(i);
      }
      std::vector<int> modifiers = config.modifier_sets[static_cast<std::size_t>(j)];
      std::sort(modifiers.begin(), modifiers.end());
      for (int k : modifiers) {
        std::vector<double> values;
        for (Eigen::Index i : members) values.push_back(x(i, k));
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
          Eigen::Index left = 0;
          for (Eigen::Index i : members) {
            if (x(i, k) <= values[v]) ++left;
          }
          const Eigen::Index right = static_cast<Eigen::Index>(members.size()) - left;
          if (left >= config.min_node_size && right >= config.min_node_size) {
            out.push_back({j, leaf, k, values[v]});
          }
        }
      }
    }
  }
  return out;
}

struct OracleBest {
  OracleCandidate candidate;
  double deviance;
};

/// Exhaustive enumeration with one independent SVD fit per candidate,
/// minimal deviance, ties broken by enumeration order.
inline std::optional<OracleBest> oracle_best_split(const tsvc::Dataset& data,
                                                   const tsvc::ModelStructure& structure,
                                                   const tsvc::TsvcConfig& config) {
  std::optional<OracleBest> best;
  for (const OracleCandidate& candidate : oracle_candidates(data, structure, config)) {
    tsvc::ModelStructure next = structure;
    auto& tree = next.trees[static_cast<std::size_t>(candidate.covariate)];
    tree = tree.split_leaf(candidate.leaf, candidate.modifier, candidate.threshold);
    const Eigen::MatrixXd design = tsvc::build_design(data, next, config);
    const auto rss = oracle_rss(design, data.outcome());
    if (!rss) continue;
    if (!best || *rss < best->deviance) best = OracleBest{candidate, *rss};
  }
  return best;
}

}  // namespace tsvc_test

#endif
