#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "condquant/dataset.hpp"
#include "condquant/random.hpp"

namespace condquant {

struct TreeParams {
  static constexpr int kUnlimitedDepth = std::numeric_limits<int>::max();

  int max_depth = kUnlimitedDepth;
  std::size_t mtry = 0;           // 0 selects every feature
  std::size_t min_node_size = 5;  // nodes with fewer points are not split
  std::size_t min_leaf_size = 1;  // every child keeps at least this many points
  bool keep_members = true;       // retain per-leaf reaching-index lists
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;  // index into leaf tables for leaves
};

// CART regression tree. Rows with x[feature] <= threshold go left.
class TreeModel {
 public:
  std::span<const TreeNode> nodes() const { return nodes_; }
  std::size_t leaf_count() const { return leaf_values_.size(); }
  int max_depth() const { return max_depth_; }
  int depth() const { return depth_; }

  double leaf_value(std::size_t leaf) const { return leaf_values_[leaf]; }
  void set_leaf_value(std::size_t leaf, double value) { leaf_values_[leaf] = value; }

  // Training indices (with bootstrap multiplicity) that reached each leaf.
  std::span<const std::size_t> leaf_members(std::size_t leaf) const { return members_[leaf]; }
  void drop_members() { members_.clear(); members_.shrink_to_fit(); }

  template <typename Row>
  std::size_t leaf_index(const Row& x) const {
    int node = 0;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
      const TreeNode& n = nodes_[static_cast<std::size_t>(node)];
      node = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].leaf);
  }

  template <typename Row>
  double predict(const Row& x) const {
    return leaf_values_[leaf_index(x)];
  }

  std::size_t leaf_index_row(const Eigen::MatrixXd& covariates, Eigen::Index row) const;
  double predict_row(const Eigen::MatrixXd& covariates, Eigen::Index row) const {
    return leaf_values_[leaf_index_row(covariates, row)];
  }
  std::vector<double> predict(const Eigen::MatrixXd& covariates) const;

 private:
  friend TreeModel fit_regression_tree(const Eigen::MatrixXd&, std::span<const double>,
                                       std::span<const std::size_t>, const TreeParams&, Rng&);

  std::vector<TreeNode> nodes_;
  std::vector<double> leaf_values_;
  std::vector<std::vector<std::size_t>> members_;
  int max_depth_ = TreeParams::kUnlimitedDepth;
  int depth_ = 0;
};

// Greedy least-squares splitting of `targets` restricted to `rows` (indices
// into covariates; repeats allowed). Each node draws `mtry` candidate features
// uniformly without replacement. Leaf values are means of the reaching targets.
TreeModel fit_regression_tree(const Eigen::MatrixXd& covariates, std::span<const double> targets,
                              std::span<const std::size_t> rows, const TreeParams& params,
                              Rng& rng);

TreeModel fit_tree(const Dataset& data, int max_depth, std::size_t mtry,
                   std::span<const std::size_t> row_subset, std::uint64_t seed,
                   std::size_t min_node_size = 5);

}  // namespace condquant
