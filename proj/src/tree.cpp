#include "tsvc/tree.hpp"

#include <sstream>

#include "tsvc/errors.hpp"

namespace tsvc {

PartitionTree PartitionTree::single_leaf(int covariate) {
  PartitionTree tree;
  tree.covariate_ = covariate;
  tree.leaf_count_ = 1;
  tree.nodes_.push_back(Node{});
  return tree;
}

int PartitionTree::assign(const Eigen::MatrixXd& x, Eigen::Index i) const {
  int node = 0;
  while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
    const Node& nd = nodes_[static_cast<std::size_t>(node)];
    node = x(i, nd.modifier) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[static_cast<std::size_t>(node)].leaf_index;
}

int PartitionTree::assign_row(const Eigen::RowVectorXd& row) const {
  int node = 0;
  while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
    const Node& nd = nodes_[static_cast<std::size_t>(node)];
    node = row(nd.modifier) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[static_cast<std::size_t>(node)].leaf_index;
}

PartitionTree PartitionTree::split_leaf(int leaf, int modifier, double threshold) const {
  if (modifier == covariate_) {
    throw ConfigError("a covariate cannot modify its own effect");
  }
  if (leaf < 0 || leaf >= leaf_count_) throw ConfigError("leaf index out of range");

  PartitionTree out(*this);
  int target = -1;
  for (std::size_t k = 0; k < out.nodes_.size(); ++k) {
    if (out.nodes_[k].is_leaf() && out.nodes_[k].leaf_index == leaf) {
      target = static_cast<int>(k);
      break;
    }
  }
  Node& nd = out.nodes_[static_cast<std::size_t>(target)];
  nd.modifier = modifier;
  nd.threshold = threshold;
  nd.left = static_cast<int>(out.nodes_.size());
  nd.right = nd.left + 1;
  out.nodes_.push_back(Node{});
  out.nodes_.push_back(Node{});
  out.renumber_leaves();
  return out;
}

void PartitionTree::renumber_leaves() {
  int next = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    Node& nd = nodes_[static_cast<std::size_t>(node)];
    if (nd.is_leaf()) {
      nd.leaf_index = next++;
    } else {
      stack.push_back(nd.right);  // left is popped first
      stack.push_back(nd.left);
    }
  }
  leaf_count_ = next;
}

std::vector<SplitRule> PartitionTree::rules() const {
  std::vector<SplitRule> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    const Node& nd = nodes_[static_cast<std::size_t>(node)];
    if (!nd.is_leaf()) {
      out.push_back(SplitRule{covariate_, nd.modifier, nd.threshold});
      stack.push_back(nd.right);
      stack.push_back(nd.left);
    }
  }
  return out;
}

std::vector<std::string> PartitionTree::leaf_descriptions(
    const std::vector<ColumnMeta>& columns) const {
  std::vector<std::string> out(static_cast<std::size_t>(leaf_count_));
  struct Frame {
    int node;
    std::string path;
  };
  std::vector<Frame> stack{{0, ""}};
  while (!stack.empty()) {
    Frame frame = stack.back();
    stack.pop_back();
    const Node& nd = nodes_[static_cast<std::size_t>(frame.node)];
    if (nd.is_leaf()) {
      out[static_cast<std::size_t>(nd.leaf_index)] =
          frame.path.empty() ? "(all)" : frame.path;
      continue;
    }
    std::ostringstream le, gt;
    const std::string& name = columns[static_cast<std::size_t>(nd.modifier)].name;
    le << name << " <= " << nd.threshold;
    gt << name << " > " << nd.threshold;
    const std::string sep = frame.path.empty() ? "" : " & ";
    stack.push_back({nd.right, frame.path + sep + gt.str()});
    stack.push_back({nd.left, frame.path + sep + le.str()});
  }
  return out;
}

ModelStructure ModelStructure::no_splits(Eigen::Index p) {
  ModelStructure out;
  out.trees.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    out.trees.push_back(PartitionTree::single_leaf(static_cast<int>(j)));
  }
  return out;
}

int ModelStructure::total_splits() const {
  int s = 0;
  for (const auto& tree : trees) s += tree.leaf_count() - 1;
  return s;
}

int assign_partition(const PartitionTree& tree, const Eigen::RowVectorXd& row) {
  return tree.assign_row(row);
}

}  // namespace tsvc
