#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "condquant/dataset.hpp"
#include "condquant/tree.hpp"

namespace condquant {

enum class BoostLoss { kSquaredError, kPinball };

struct BoostParams {
  std::size_t max_trees = 1000;
  double shrinkage = 0.02;
  int depth = 6;
  double subsample_fraction = 0.5;
  std::size_t min_leaf_size = 10;
  std::uint64_t seed = 0;
};

// Stagewise additive tree ensemble. Every fitted stage is retained so any
// prefix of 0..trees.size() stages can be evaluated without refitting;
// n_trees is the prefix used by predict().
struct BoostModel {
  std::vector<TreeModel> trees;
  double shrinkage = 0.02;
  std::size_t n_trees = 0;
  double initial_prediction = 0.0;
  double subsample_fraction = 1.0;
  BoostLoss loss = BoostLoss::kSquaredError;
  std::size_t training_rows = 0;

  double predict_row(const Eigen::MatrixXd& covariates, Eigen::Index row, std::size_t stages) const;
  std::vector<double> predict(const Eigen::MatrixXd& covariates) const;
  std::vector<double> predict(const Eigen::MatrixXd& covariates, std::size_t stages) const;

  // visit(m, predictions) is called for m = 0..max_stages with the m-stage
  // predictions of every row of `covariates`.
  void staged_predict(const Eigen::MatrixXd& covariates, std::size_t max_stages,
                      const std::function<void(std::size_t, std::span<const double>)>& visit) const;

  // Copy limited to the first `stages` trees.
  BoostModel truncated(std::size_t stages) const;
};

struct QuantileBoostModel : BoostModel {
  double alpha = 0.5;

  QuantileBoostModel truncated(std::size_t stages) const;
};

// Smallest training set for which the per-stage subsample can be split.
std::size_t boost_min_rows(const BoostParams& params);

BoostModel fit_gbm(const Dataset& data, const BoostParams& params);

// Pinball-loss boosting: trees fit the negative gradient, leaf values are
// the alpha-quantile of within-leaf residuals, and stage 0 predicts the
// empirical alpha-quantile of the responses.
QuantileBoostModel fit_quantile_gbm(const Dataset& data, double alpha, const BoostParams& params);

}  // namespace condquant
