#include "condquant/forest.hpp"

#include <cmath>
#include <limits>

#include "condquant/error.hpp"
#include "condquant/parallel.hpp"
#include "condquant/random.hpp"

namespace condquant {

double ForestModel::predict_row(const Eigen::MatrixXd& covariates, Eigen::Index row) const {
  double acc = 0.0;
  for (const TreeModel& tree : trees) acc += tree.predict_row(covariates, row);
  return acc / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict(const Eigen::MatrixXd& covariates) const {
  std::vector<double> out(static_cast<std::size_t>(covariates.rows()));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = predict_row(covariates, i);
  }
  return out;
}

std::size_t ForestModel::missing_oob_count() const {
  std::size_t count = 0;
  for (bool m : oob_missing) count += m ? 1 : 0;
  return count;
}

double ForestModel::oob_rmse() const {
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < oob_predictions.size(); ++i) {
    if (oob_missing[i]) continue;
    const double d = train_responses[i] - oob_predictions[i];
    ss += d * d;
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : std::sqrt(ss / static_cast<double>(count));
}

std::size_t default_mtry(std::size_t p) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
}

ForestModel fit_random_forest(const Dataset& data, const ForestParams& params) {
  data.validate();
  require(params.n_trees >= 1, ErrorCode::kInvalidInput, "forest needs at least one tree");
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  const std::size_t mtry = params.mtry == 0 ? default_mtry(p) : params.mtry;
  require(mtry >= 1 && mtry <= p, ErrorCode::kInvalidInput, "mtry must lie in [1, p]");

  ForestModel forest;
  forest.mtry = mtry;
  forest.training_rows = n;
  forest.train_responses = data.responses;
  forest.trees.resize(params.n_trees);
  forest.bootstrap_masks.assign(params.n_trees, std::vector<bool>(n, false));
  if (params.record_membership) forest.membership.resize(params.n_trees);

  TreeParams tree_params;
  tree_params.mtry = mtry;
  tree_params.min_node_size = params.min_node_size;
  tree_params.keep_members = false;

  // Per-tree leaf of every training point; drives OOB aggregation and membership.
  std::vector<std::vector<std::uint32_t>> leaf_of(params.n_trees);

  parallel_for(
      params.n_trees,
      [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(params.seed, t));
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        std::vector<std::size_t> sample(n);
        for (std::size_t& s : sample) s = draw(rng);
        std::vector<bool>& mask = forest.bootstrap_masks[t];
        for (std::size_t s : sample) mask[s] = true;

        forest.trees[t] =
            fit_regression_tree(data.covariates, data.responses, sample, tree_params, rng);

        std::vector<std::uint32_t>& leaves = leaf_of[t];
        leaves.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          leaves[i] = static_cast<std::uint32_t>(
              forest.trees[t].leaf_index_row(data.covariates, static_cast<Eigen::Index>(i)));
        }
        if (params.record_membership) {
          auto& members = forest.membership[t];
          members.assign(forest.trees[t].leaf_count(), {});
          for (std::size_t i = 0; i < n; ++i) {
            members[leaves[i]].push_back(static_cast<std::uint32_t>(i));
          }
        }
      },
      params.threads);

  forest.oob_predictions.assign(n, 0.0);
  forest.oob_missing.assign(n, false);
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (forest.bootstrap_masks[t][i]) continue;
      forest.oob_predictions[i] += forest.trees[t].leaf_value(leaf_of[t][i]);
      ++counts[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 0) {
      forest.oob_missing[i] = true;
      forest.oob_predictions[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      forest.oob_predictions[i] /= static_cast<double>(counts[i]);
    }
  }
  return forest;
}

}  // namespace condquant
