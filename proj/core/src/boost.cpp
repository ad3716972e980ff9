#include "condquant/boost.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "condquant/error.hpp"
#include "condquant/random.hpp"

namespace condquant {
namespace {

void validate_params(const BoostParams& params, std::size_t n) {
  require(params.max_trees >= 1, ErrorCode::kInvalidInput, "boosting needs at least one tree");
  require(std::isfinite(params.shrinkage) && params.shrinkage > 0.0, ErrorCode::kInvalidInput,
          "shrinkage must be positive");
  require(params.depth >= 1, ErrorCode::kInvalidInput, "tree depth must be positive");
  require(params.subsample_fraction > 0.0 && params.subsample_fraction <= 1.0,
          ErrorCode::kInvalidInput, "subsample fraction must lie in (0, 1]");
  const std::size_t required = boost_min_rows(params);
  if (n < required) {
    raise(ErrorCode::kInvalidConfiguration,
          "gradient boosting with subsample fraction " + std::to_string(params.subsample_fraction) +
              " and minimum leaf size " + std::to_string(params.min_leaf_size) +
              " needs at least " + std::to_string(required) + " training rows, got " +
              std::to_string(n));
  }
}

std::size_t subsample_size(std::size_t n, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction)));
}

template <typename Model, typename StageTargets, typename LeafUpdate>
void run_stages(const Dataset& data, const BoostParams& params, Model& model,
                StageTargets&& stage_targets, LeafUpdate&& leaf_update) {
  const std::size_t n = data.rows();
  const std::size_t k = subsample_size(n, params.subsample_fraction);
  std::vector<double> current(n, model.initial_prediction);
  std::vector<double> targets(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  TreeParams tree_params;
  tree_params.max_depth = params.depth;
  tree_params.mtry = 0;
  tree_params.min_leaf_size = std::max<std::size_t>(1, params.min_leaf_size);
  tree_params.min_node_size = 2 * tree_params.min_leaf_size;
  tree_params.keep_members = true;

  model.trees.reserve(params.max_trees);
  std::vector<std::size_t> rows;
  for (std::size_t stage = 0; stage < params.max_trees; ++stage) {
    Rng rng = make_rng(derive_seed(params.seed, stage));
    if (k < n) {
      std::vector<std::size_t> pool = all;
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(rows.begin(), rows.end());
    } else {
      rows = all;
    }
    stage_targets(current, targets);
    TreeModel tree = fit_regression_tree(data.covariates, targets, rows, tree_params, rng);
    leaf_update(tree, current);
    tree.drop_members();
    for (std::size_t i = 0; i < n; ++i) {
      current[i] += model.shrinkage * tree.predict_row(data.covariates, static_cast<Eigen::Index>(i));
    }
    model.trees.push_back(std::move(tree));
  }
  model.n_trees = model.trees.size();
}

}  // namespace

double BoostModel::predict_row(const Eigen::MatrixXd& covariates, Eigen::Index row,
                               std::size_t stages) const {
  require(stages <= trees.size(), ErrorCode::kInvalidInput, "stage count exceeds fitted trees");
  double acc = 0.0;
  for (std::size_t t = 0; t < stages; ++t) acc += trees[t].predict_row(covariates, row);
  return initial_prediction + shrinkage * acc;
}

std::vector<double> BoostModel::predict(const Eigen::MatrixXd& covariates) const {
  return predict(covariates, n_trees);
}

std::vector<double> BoostModel::predict(const Eigen::MatrixXd& covariates,
                                        std::size_t stages) const {
  std::vector<double> out(static_cast<std::size_t>(covariates.rows()));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = predict_row(covariates, i, stages);
  }
  return out;
}

void BoostModel::staged_predict(
    const Eigen::MatrixXd& covariates, std::size_t max_stages,
    const std::function<void(std::size_t, std::span<const double>)>& visit) const {
  require(max_stages <= trees.size(), ErrorCode::kInvalidInput, "stage count exceeds fitted trees");
  const auto n = static_cast<std::size_t>(covariates.rows());
  std::vector<double> sums(n, 0.0);
  std::vector<double> predictions(n, initial_prediction);
  visit(0, predictions);
  for (std::size_t t = 0; t < max_stages; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      sums[i] += trees[t].predict_row(covariates, static_cast<Eigen::Index>(i));
      predictions[i] = initial_prediction + shrinkage * sums[i];
    }
    visit(t + 1, predictions);
  }
}

BoostModel BoostModel::truncated(std::size_t stages) const {
  require(stages <= trees.size(), ErrorCode::kInvalidInput, "stage count exceeds fitted trees");
  BoostModel copy = *this;
  copy.trees.resize(stages);
  copy.n_trees = stages;
  return copy;
}

QuantileBoostModel QuantileBoostModel::truncated(std::size_t stages) const {
  QuantileBoostModel copy;
  static_cast<BoostModel&>(copy) = BoostModel::truncated(stages);
  copy.alpha = alpha;
  return copy;
}

std::size_t boost_min_rows(const BoostParams& params) {
  const double needed = 2.0 * static_cast<double>(std::max<std::size_t>(1, params.min_leaf_size));
  return static_cast<std::size_t>(std::ceil(needed / params.subsample_fraction - 1e-9));
}

BoostModel fit_gbm(const Dataset& data, const BoostParams& params) {
  data.validate();
  validate_params(params, data.rows());
  BoostModel model;
  model.shrinkage = params.shrinkage;
  model.subsample_fraction = params.subsample_fraction;
  model.loss = BoostLoss::kSquaredError;
  model.training_rows = data.rows();
  model.initial_prediction = mean(data.responses);

  const std::vector<double>& y = data.responses;
  run_stages(
      data, params, model,
      [&](const std::vector<double>& current, std::vector<double>& targets) {
        for (std::size_t i = 0; i < y.size(); ++i) targets[i] = y[i] - current[i];
      },
      [](TreeModel&, const std::vector<double>&) {});
  return model;
}

QuantileBoostModel fit_quantile_gbm(const Dataset& data, double alpha, const BoostParams& params) {
  data.validate();
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  validate_params(params, data.rows());
  QuantileBoostModel model;
  model.alpha = alpha;
  model.shrinkage = params.shrinkage;
  model.subsample_fraction = params.subsample_fraction;
  model.loss = BoostLoss::kPinball;
  model.training_rows = data.rows();
  model.initial_prediction = empirical_quantile(data.responses, alpha);

  const std::vector<double>& y = data.responses;
  std::vector<double> residuals;
  run_stages(
      data, params, model,
      [&](const std::vector<double>& current, std::vector<double>& targets) {
        for (std::size_t i = 0; i < y.size(); ++i) {
          targets[i] = pinball_negative_gradient(y[i], current[i], alpha);
        }
      },
      [&](TreeModel& tree, const std::vector<double>& current) {
        for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
          residuals.clear();
          for (std::size_t i : tree.leaf_members(leaf)) residuals.push_back(y[i] - current[i]);
          tree.set_leaf_value(leaf, empirical_quantile(residuals, alpha));
        }
      });
  return model;
}

}  // namespace condquant
