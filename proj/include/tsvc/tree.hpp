#ifndef TSVC_TREE_HPP
#define TSVC_TREE_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tsvc/dataset.hpp"

namespace tsvc {

/// One binary split: the coefficient of `target_covariate` differs between
/// {x_modifier <= threshold} and {x_modifier > threshold}.
struct SplitRule {
  int target_covariate = -1;
  int modifier = -1;
  double threshold = 0.0;

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

/// Binary partition tree for one covariate's coefficient. Internal nodes
/// carry (modifier, threshold); rows descend left on `x_modifier <= threshold`.
/// Leaves are numbered 0..leaf_count()-1 in depth-first (left before right)
/// order, which keeps leaf indices stable and reproducible across refits.
class PartitionTree {
 public:
  struct Node {
    int modifier = -1;        // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_index = 0;       // valid for leaves only
    bool is_leaf() const { return modifier < 0; }
  };

  static PartitionTree single_leaf(int covariate);

  int covariate() const { return covariate_; }
  int leaf_count() const { return leaf_count_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Leaf index of row `i` of covariate matrix `x` (rows are exhaustive and
  /// disjoint by construction, so this always succeeds).
  int assign(const Eigen::MatrixXd& x, Eigen::Index i) const;

  /// Leaf index of a free covariate row.
  int assign_row(const Eigen::RowVectorXd& row) const;

  /// New tree with leaf `leaf` replaced by an internal node splitting on
  /// (modifier, threshold). A covariate may not modify itself.
  PartitionTree split_leaf(int leaf, int modifier, double threshold) const;

  /// Split rules of all internal nodes, depth-first.
  std::vector<SplitRule> rules() const;

  /// Human-readable condition path per leaf, e.g. "x2 <= 0.5 & x3 > 0";
  /// a lone leaf reads "(all)".
  std::vector<std::string> leaf_descriptions(const std::vector<ColumnMeta>& columns) const;

 private:
  void renumber_leaves();

  int covariate_ = -1;
  int leaf_count_ = 1;
  std::vector<Node> nodes_;
};

/// Per-covariate partition trees; the selected model structure.
struct ModelStructure {
  std::vector<PartitionTree> trees;

  static ModelStructure no_splits(Eigen::Index p);

  /// Total number of performed splits, sum over covariates of (M_j - 1).
  int total_splits() const;
};

/// Leaf index of `row` under `tree` (spec-level name for PartitionTree::assign_row).
int assign_partition(const PartitionTree& tree, const Eigen::RowVectorXd& row);

}  // namespace tsvc

#endif
