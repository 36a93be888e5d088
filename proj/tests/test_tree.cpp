#include <doctest.h>

#include "helpers.hpp"
#include "tsvc/errors.hpp"
#include "tsvc/tree.hpp"

using namespace tsvc;

TEST_CASE("a single-leaf tree assigns every row to partition 0") {
  const PartitionTree tree = PartitionTree::single_leaf(0);
  Eigen::MatrixXd x(2, 3);
  x << 1, 2, 3, -1, -2, -3;
  CHECK(tree.assign(x, 0) == 0);
  CHECK(tree.assign(x, 1) == 0);
  CHECK(tree.leaf_count() == 1);
}

TEST_CASE("the split boundary itself goes left") {
  PartitionTree tree = PartitionTree::single_leaf(0).split_leaf(0, 1, 0.5);
  Eigen::RowVectorXd at_boundary(2), above(2);
  at_boundary << 9.0, 0.5;
  above << 9.0, 0.500001;
  CHECK(assign_partition(tree, at_boundary) == 0);
  CHECK(assign_partition(tree, above) == 1);
}

TEST_CASE("two-level tree isolates the x2 <= 0.5 and x3 = 1 partition") {
  // Tree for x1's coefficient: split on x2 at 0.5, then the left child on x3
  // at 0 (binary, so <= 0 means x3 = 0). Leaves in DFS order:
  //   0: x2 <= 0.5 & x3 = 0,  1: x2 <= 0.5 & x3 = 1,  2: x2 > 0.5.
  PartitionTree tree = PartitionTree::single_leaf(0).split_leaf(0, 1, 0.5);
  tree = tree.split_leaf(0, 2, 0.0);
  CHECK(tree.leaf_count() == 3);

  Eigen::RowVectorXd row(3);
  row << 1.0, 0.3, 1.0;
  CHECK(assign_partition(tree, row) == 1);
  row << 1.0, 0.3, 0.0;
  CHECK(assign_partition(tree, row) == 0);
  row << 1.0, 0.7, 1.0;
  CHECK(assign_partition(tree, row) == 2);
}

TEST_CASE("leaves stay disjoint and exhaustive under random splits") {
  Rng rng(99);
  for (int round = 0; round < 10; ++round) {
    const Dataset data = tsvc_test::random_dataset(rng, 60, 3, true);
    PartitionTree tree = PartitionTree::single_leaf(0);
    for (int s = 0; s < 4; ++s) {
      const int leaf = static_cast<int>(rng.below(tree.leaf_count()));
      const int modifier = rng.bernoulli(0.5) ? 1 : 2;
      const Eigen::Index row = static_cast<Eigen::Index>(rng.below(60));
      tree = tree.split_leaf(leaf, modifier, data.covariates()(row, modifier));
    }
    std::vector<int> counts(static_cast<std::size_t>(tree.leaf_count()), 0);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const int leaf = tree.assign(data.covariates(), i);
      REQUIRE(leaf >= 0);
      REQUIRE(leaf < tree.leaf_count());
      ++counts[static_cast<std::size_t>(leaf)];
    }
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == data.n());  // each row in exactly one leaf
  }
}

TEST_CASE("leaf indices are renumbered in depth-first order") {
  PartitionTree tree = PartitionTree::single_leaf(0).split_leaf(0, 1, 0.0);
  tree = tree.split_leaf(1, 2, 1.0);  // splitting the right leaf
  // DFS order: left leaf of root, then the two children of the right split.
  const auto rules = tree.rules();
  REQUIRE(rules.size() == 2);
  CHECK(rules[0].modifier == 1);
  CHECK(rules[1].modifier == 2);
  CHECK(tree.leaf_count() == 3);

  Eigen::RowVectorXd row(3);
  row << 0, -1, 0;
  CHECK(assign_partition(tree, row) == 0);
  row << 0, 1, 0.5;
  CHECK(assign_partition(tree, row) == 1);
  row << 0, 1, 2.0;
  CHECK(assign_partition(tree, row) == 2);
}

TEST_CASE("a covariate cannot modify itself") {
  const PartitionTree tree = PartitionTree::single_leaf(1);
  CHECK_THROWS_AS(tree.split_leaf(0, 1, 0.0), ConfigError);
}

TEST_CASE("leaf descriptions read as condition paths") {
  std::vector<ColumnMeta> columns{{"x1", ColumnKind::continuous},
                                  {"x2", ColumnKind::continuous},
                                  {"x3", ColumnKind::binary}};
  PartitionTree tree = PartitionTree::single_leaf(0);
  CHECK(tree.leaf_descriptions(columns)[0] == "(all)");

  tree = tree.split_leaf(0, 1, 0.5);
  tree = tree.split_leaf(0, 2, 0.0);
  const auto descriptions = tree.leaf_descriptions(columns);
  CHECK(descriptions[0] == "x2 <= 0.5 & x3 <= 0");
  CHECK(descriptions[1] == "x2 <= 0.5 & x3 > 0");
  CHECK(descriptions[2] == "x2 > 0.5");
}

TEST_CASE("total splits sums leaf counts minus one") {
  ModelStructure structure = ModelStructure::no_splits(3);
  CHECK(structure.total_splits() == 0);
  structure.trees[0] = structure.trees[0].split_leaf(0, 1, 0.0);
  structure.trees[0] = structure.trees[0].split_leaf(0, 2, 0.0);
  structure.trees[2] = structure.trees[2].split_leaf(0, 0, 1.0);
  CHECK(structure.total_splits() == 3);
}
