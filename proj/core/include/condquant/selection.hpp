#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "condquant/boost.hpp"
#include "condquant/dataset.hpp"
#include "condquant/forest.hpp"
#include "condquant/ridge.hpp"

namespace condquant {

struct CandidateScore {
  std::string label;
  nlohmann::json hyperparameters = nlohmann::json::object();
  double train_error = 0.0;
  double validation_error = 0.0;
  bool admissible = true;
  bool chosen = false;
};

struct SelectionReport {
  std::string model;
  std::string criterion;
  std::vector<CandidateScore> candidates;
  std::size_t chosen_index = 0;
  // No candidate passed the overfitting guard; the train/validation ratio
  // maximizer was taken instead.
  bool fallback = false;

  const CandidateScore& chosen() const { return candidates.at(chosen_index); }
};

nlohmann::json to_json(const SelectionReport& report);

// Mean-model rule: a candidate is admissible when its training error is at
// least `ratio` times its validation error; the admissible candidate with the
// smallest validation error wins.
SelectionReport select_mean_model(std::vector<CandidateScore> candidates, double ratio = 0.5);

// Plain minimum validation error (forest OOB selection, direct quantile models).
SelectionReport select_min_validation(std::vector<CandidateScore> candidates);

// Seeded fold label per index; every fold receives floor(n/k) or ceil(n/k) rows.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

struct CvScore {
  double train_error = 0.0;
  double validation_error = 0.0;
};

// Returns, for one fold, the errors of every candidate fitted on `train`.
using FoldEvaluator =
    std::function<std::vector<CvScore>(const Dataset& train, const Dataset& validation)>;

// Per-candidate errors averaged over folds.
std::vector<CvScore> cross_validate(const Dataset& data, const FoldEvaluator& evaluate,
                                    std::size_t folds = 5, std::uint64_t seed = 0);

// floor of {1/3, 1/2, 1, 2, sqrt(p)} * sqrt(p), clamped to [1, p], unique, ascending.
std::vector<std::size_t> mtry_grid(std::size_t p);

struct RidgeSelection {
  RidgeModel model;
  SelectionReport report;
};

struct BoostSelection {
  BoostModel model;
  SelectionReport report;
};

struct ForestSelection {
  ForestModel model;
  SelectionReport report;
};

RidgeSelection select_ridge(const Dataset& data, std::size_t grid_size = 20,
                            std::size_t folds = 5, std::uint64_t seed = 0);

// Chooses the number of stages 1..max_trees from the cross-validated curve
// under the guarded mean-model rule, then fits on all of `data`.
BoostSelection select_gbm(const Dataset& data, const BoostParams& params, std::size_t folds = 5,
                          std::uint64_t cv_seed = 0);

// Fits one forest per mtry_grid value and keeps the lowest OOB RMSE.
ForestSelection select_forest(const Dataset& data, const ForestParams& params);

using MeanModel = std::variant<RidgeModel, ForestModel, BoostModel>;

std::string model_name(const MeanModel& model);

std::vector<double> predict(const MeanModel& model, const Eigen::MatrixXd& covariates);

struct FittedValues {
  std::vector<double> values;
  // Forest points in-bag for every tree, replaced by the full-forest prediction.
  std::size_t substituted = 0;
};

// Training-time fitted values: OOB predictions for forests, in-sample
// predictions otherwise.
FittedValues training_fitted_values(const MeanModel& model, const Dataset& data);

}  // namespace condquant
