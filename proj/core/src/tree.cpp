#include "condquant/tree.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "condquant/error.hpp"

namespace condquant {
namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double reduction = 0.0;
};

struct PendingNode {
  std::size_t node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> targets, const TreeParams& params,
              Rng& rng)
      : x_(x), targets_(targets), params_(params), rng_(rng) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  SplitCandidate best_split(std::span<const std::size_t> rows) {
    const std::size_t m = rows.size();
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t r : rows) {
      sum += targets_[r];
      sum_sq += targets_[r] * targets_[r];
    }
    const double parent_sse = sum_sq - sum * sum / static_cast<double>(m);
    SplitCandidate best;
    if (!(parent_sse > 0.0)) return best;

    const std::size_t p = features_.size();
    const std::size_t mtry = (params_.mtry == 0 || params_.mtry > p) ? p : params_.mtry;
    // Partial Fisher-Yates: the first mtry entries become the candidates.
    for (std::size_t k = 0; k < mtry && mtry < p; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, p - 1);
      std::swap(features_[k], features_[pick(rng_)]);
    }
    candidates_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry));
    std::sort(candidates_.begin(), candidates_.end());

    const double tolerance = 1e-12 * std::max(parent_sse, sum_sq);
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_leaf_size);
    for (int f : candidates_) {
      pairs_.clear();
      for (std::size_t r : rows) {
        pairs_.emplace_back(x_(static_cast<Eigen::Index>(r), f), targets_[r]);
      }
      std::sort(pairs_.begin(), pairs_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        left_sum += pairs_[k].second;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = m - n_left;
        if (pairs_[k].first == pairs_[k + 1].first) continue;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) -
                            sum * sum / static_cast<double>(m);
        if (gain > best.reduction + tolerance) {
          const double lo = pairs_[k].first;
          const double hi = pairs_[k + 1].first;
          double mid = lo + 0.5 * (hi - lo);
          if (!(mid < hi)) mid = lo;
          best = {f, mid, gain};
        }
      }
    }
    return best;
  }

 private:
  const Eigen::MatrixXd& x_;
  std::span<const double> targets_;
  const TreeParams& params_;
  Rng& rng_;
  std::vector<int> features_;
  std::vector<int> candidates_;
  std::vector<std::pair<double, double>> pairs_;
};

}  // namespace

std::size_t TreeModel::leaf_index_row(const Eigen::MatrixXd& covariates, Eigen::Index row) const {
  int node = 0;
  while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(node)];
    node = covariates(row, n.feature) <= n.threshold ? n.left : n.right;
  }
  return static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].leaf);
}

std::vector<double> TreeModel::predict(const Eigen::MatrixXd& covariates) const {
  std::vector<double> out(static_cast<std::size_t>(covariates.rows()));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = predict_row(covariates, i);
  }
  return out;
}

TreeModel fit_regression_tree(const Eigen::MatrixXd& covariates, std::span<const double> targets,
                              std::span<const std::size_t> rows, const TreeParams& params,
                              Rng& rng) {
  require(!rows.empty(), ErrorCode::kInvalidInput, "tree row subset is empty");
  require(params.max_depth >= 1, ErrorCode::kInvalidInput, "tree max_depth must be positive");
  require(params.mtry <= static_cast<std::size_t>(covariates.cols()), ErrorCode::kInvalidInput,
          "mtry exceeds the number of covariates");
  require(static_cast<std::size_t>(covariates.rows()) == targets.size(), ErrorCode::kInvalidInput,
          "covariates and targets differ in length");
  for (std::size_t r : rows) {
    require(r < targets.size(), ErrorCode::kInvalidInput,
            "tree row index " + std::to_string(r) + " out of range");
  }

  TreeModel tree;
  tree.max_depth_ = params.max_depth;
  std::vector<std::size_t> work(rows.begin(), rows.end());
  TreeBuilder builder(covariates, targets, params, rng);

  tree.nodes_.emplace_back();
  std::vector<PendingNode> stack{{0, 0, work.size(), 0}};
  while (!stack.empty()) {
    const PendingNode current = stack.back();
    stack.pop_back();
    const std::span<std::size_t> node_rows(work.data() + current.begin, current.end - current.begin);
    tree.depth_ = std::max(tree.depth_, current.depth);

    SplitCandidate split;
    if (current.depth < params.max_depth && node_rows.size() >= params.min_node_size &&
        node_rows.size() >= 2) {
      split = builder.best_split(node_rows);
    }

    if (split.feature < 0) {
      double sum = 0.0;
      for (std::size_t r : node_rows) sum += targets[r];
      TreeNode& leaf = tree.nodes_[current.node];
      leaf.leaf = static_cast<int>(tree.leaf_values_.size());
      tree.leaf_values_.push_back(sum / static_cast<double>(node_rows.size()));
      if (params.keep_members) tree.members_.emplace_back(node_rows.begin(), node_rows.end());
      continue;
    }

    const auto middle = std::stable_partition(
        node_rows.begin(), node_rows.end(), [&](std::size_t r) {
          return covariates(static_cast<Eigen::Index>(r), split.feature) <= split.threshold;
        });
    const std::size_t mid = current.begin + static_cast<std::size_t>(middle - node_rows.begin());

    const std::size_t left = tree.nodes_.size();
    tree.nodes_.emplace_back();
    tree.nodes_.emplace_back();
    TreeNode& parent = tree.nodes_[current.node];
    parent.feature = split.feature;
    parent.threshold = split.threshold;
    parent.left = static_cast<int>(left);
    parent.right = static_cast<int>(left + 1);
    // Right child pushed first so the left subtree is expanded first.
    stack.push_back({left + 1, mid, current.end, current.depth + 1});
    stack.push_back({left, current.begin, mid, current.depth + 1});
  }
  return tree;
}

TreeModel fit_tree(const Dataset& data, int max_depth, std::size_t mtry,
                   std::span<const std::size_t> row_subset, std::uint64_t seed,
                   std::size_t min_node_size) {
  data.validate();
  require(mtry >= 1 && mtry <= data.cols(), ErrorCode::kInvalidInput, "mtry must lie in [1, p]");
  TreeParams params;
  params.max_depth = max_depth;
  params.mtry = mtry;
  params.min_node_size = min_node_size;
  Rng rng = make_rng(seed);
  return fit_regression_tree(data.covariates, data.responses, row_subset, params, rng);
}

}  // namespace condquant
