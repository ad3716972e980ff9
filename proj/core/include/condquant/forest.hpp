#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "condquant/dataset.hpp"
#include "condquant/tree.hpp"

namespace condquant {

struct ForestParams {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 selects floor(sqrt(p))
  std::size_t min_node_size = 5;
  std::uint64_t seed = 0;
  // Route every training point through every tree and record leaf membership
  // (needed for quantile-regression-forest weights).
  bool record_membership = true;
  unsigned threads = 0;  // 0 uses the hardware concurrency
};

struct ForestModel {
  std::vector<TreeModel> trees;
  // bootstrap_masks[t][i] is true when training point i was drawn for tree t.
  std::vector<std::vector<bool>> bootstrap_masks;
  std::size_t mtry = 1;
  std::size_t training_rows = 0;
  // Mean over trees whose bootstrap sample excluded the point; NaN where no
  // such tree exists (see oob_missing).
  std::vector<double> oob_predictions;
  std::vector<bool> oob_missing;
  // membership[t][leaf] lists every training index routed to that leaf.
  std::vector<std::vector<std::vector<std::uint32_t>>> membership;
  std::vector<double> train_responses;

  double predict_row(const Eigen::MatrixXd& covariates, Eigen::Index row) const;
  std::vector<double> predict(const Eigen::MatrixXd& covariates) const;
  std::size_t missing_oob_count() const;
  // RMSE of the OOB predictions over the points that have one.
  double oob_rmse() const;
};

std::size_t default_mtry(std::size_t p);

ForestModel fit_random_forest(const Dataset& data, const ForestParams& params);

}  // namespace condquant
