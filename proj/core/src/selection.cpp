#include "condquant/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include "condquant/error.hpp"
#include "condquant/random.hpp"

namespace condquant {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double safe_ratio(double train, double validation) {
  if (validation > 0.0) return train / validation;
  return train > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace

nlohmann::json to_json(const SelectionReport& report) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const CandidateScore& c : report.candidates) {
    candidates.push_back({{"label", c.label},
                          {"hyperparameters", c.hyperparameters},
                          {"train_error", c.train_error},
                          {"validation_error", c.validation_error},
                          {"admissible", c.admissible},
                          {"chosen", c.chosen}});
  }
  return {{"model", report.model},
          {"criterion", report.criterion},
          {"chosen_index", report.chosen_index},
          {"chosen_label", report.candidates.empty() ? "" : report.chosen().label},
          {"fallback", report.fallback},
          {"candidates", std::move(candidates)}};
}

SelectionReport select_mean_model(std::vector<CandidateScore> candidates, double ratio) {
  require(!candidates.empty(), ErrorCode::kInvalidInput, "model selection needs candidates");
  SelectionReport report;
  report.criterion = "guarded-validation";
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    CandidateScore& c = candidates[i];
    c.chosen = false;
    c.admissible = c.train_error >= ratio * c.validation_error;
    if (c.admissible && (!best || c.validation_error < candidates[*best].validation_error)) {
      best = i;
    }
  }
  if (!best) {
    report.fallback = true;
    best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (safe_ratio(candidates[i].train_error, candidates[i].validation_error) >
          safe_ratio(candidates[*best].train_error, candidates[*best].validation_error)) {
        best = i;
      }
    }
  }
  candidates[*best].chosen = true;
  report.chosen_index = *best;
  report.candidates = std::move(candidates);
  return report;
}

SelectionReport select_min_validation(std::vector<CandidateScore> candidates) {
  require(!candidates.empty(), ErrorCode::kInvalidInput, "model selection needs candidates");
  SelectionReport report;
  report.criterion = "min-validation";
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].admissible = true;
    candidates[i].chosen = false;
    if (candidates[i].validation_error < candidates[best].validation_error) best = i;
  }
  candidates[best].chosen = true;
  report.chosen_index = best;
  report.candidates = std::move(candidates);
  return report;
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  require(folds >= 2, ErrorCode::kInvalidConfiguration, "cross-validation needs at least 2 folds");
  require(n >= folds, ErrorCode::kInvalidConfiguration,
          "cross-validation needs at least as many rows as folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[order[k]] = k % folds;
  return fold;
}

std::vector<CvScore> cross_validate(const Dataset& data, const FoldEvaluator& evaluate,
                                    std::size_t folds, std::uint64_t seed) {
  data.validate();
  const std::vector<std::size_t> fold = assign_folds(data.rows(), folds, seed);
  std::vector<CvScore> total;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, validation_rows;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      (fold[i] == f ? validation_rows : train_rows).push_back(i);
    }
    if (validation_rows.size() < 2 || train_rows.size() < 2) {
      raise(ErrorCode::kInvalidConfiguration,
            "cross-validation fold " + std::to_string(f) + " has fewer than 2 points");
    }
    const std::vector<CvScore> scores =
        evaluate(data.subset(train_rows), data.subset(validation_rows));
    if (f == 0) {
      total.assign(scores.size(), CvScore{});
    } else {
      require(scores.size() == total.size(), ErrorCode::kContractViolation,
              "fold evaluator returned a varying number of candidates");
    }
    for (std::size_t c = 0; c < scores.size(); ++c) {
      total[c].train_error += scores[c].train_error;
      total[c].validation_error += scores[c].validation_error;
    }
  }
  for (CvScore& s : total) {
    s.train_error /= static_cast<double>(folds);
    s.validation_error /= static_cast<double>(folds);
  }
  return total;
}

std::vector<std::size_t> mtry_grid(std::size_t p) {
  require(p >= 1, ErrorCode::kInvalidInput, "mtry grid needs p >= 1");
  const double root = std::sqrt(static_cast<double>(p));
  const double raw[] = {root / 3.0, root / 2.0, root, 2.0 * root};
  std::set<std::size_t> values;
  for (double v : raw) {
    const auto m = static_cast<std::size_t>(std::floor(v + 1e-9));
    values.insert(std::clamp<std::size_t>(m, 1, p));
  }
  values.insert(p);  // sqrt(p) * sqrt(p)
  return {values.begin(), values.end()};
}

RidgeSelection select_ridge(const Dataset& data, std::size_t grid_size, std::size_t folds,
                            std::uint64_t seed) {
  const std::vector<double> grid = ridge_penalty_grid(data, grid_size);
  const std::vector<CvScore> scores = cross_validate(
      data,
      [&](const Dataset& train, const Dataset& validation) {
        std::vector<CvScore> out;
        out.reserve(grid.size());
        for (double penalty : grid) {
          const RidgeModel m = fit_ridge(train, penalty);
          out.push_back({rmse(train.responses, m.predict(train.covariates)),
                         rmse(validation.responses, m.predict(validation.covariates))});
        }
        return out;
      },
      folds, seed);

  std::vector<CandidateScore> candidates;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CandidateScore c;
    c.label = "penalty=" + std::to_string(grid[k]);
    c.hyperparameters = {{"penalty", grid[k]}};
    c.train_error = scores[k].train_error;
    c.validation_error = scores[k].validation_error;
    candidates.push_back(std::move(c));
  }
  RidgeSelection out;
  out.report = select_mean_model(std::move(candidates));
  out.report.model = "LM";
  out.report.criterion = "cv" + std::to_string(folds) + "-rmse-guarded";
  out.model = fit_ridge(data, grid[out.report.chosen_index]);
  return out;
}

BoostSelection select_gbm(const Dataset& data, const BoostParams& params, std::size_t folds,
                          std::uint64_t cv_seed) {
  const std::size_t stages = params.max_trees;
  const std::vector<CvScore> scores = cross_validate(
      data,
      [&](const Dataset& train, const Dataset& validation) {
        const BoostModel m = fit_gbm(train, params);
        std::vector<CvScore> out(stages);
        m.staged_predict(train.covariates, stages, [&](std::size_t s, std::span<const double> p) {
          if (s > 0) out[s - 1].train_error = rmse(train.responses, p);
        });
        m.staged_predict(validation.covariates, stages,
                         [&](std::size_t s, std::span<const double> p) {
                           if (s > 0) out[s - 1].validation_error = rmse(validation.responses, p);
                         });
        return out;
      },
      folds, cv_seed);

  std::vector<CandidateScore> candidates;
  candidates.reserve(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    CandidateScore c;
    c.label = "trees=" + std::to_string(s + 1);
    c.hyperparameters = {{"n_trees", s + 1},
                         {"shrinkage", params.shrinkage},
                         {"depth", params.depth}};
    c.train_error = scores[s].train_error;
    c.validation_error = scores[s].validation_error;
    candidates.push_back(std::move(c));
  }
  BoostSelection out;
  out.report = select_mean_model(std::move(candidates));
  out.report.model = "GB";
  out.report.criterion = "cv" + std::to_string(folds) + "-rmse-guarded";
  out.model = fit_gbm(data, params);
  out.model.n_trees = out.report.chosen_index + 1;
  return out;
}

ForestSelection select_forest(const Dataset& data, const ForestParams& params) {
  data.validate();
  const std::vector<std::size_t> grid = mtry_grid(data.cols());
  std::vector<CandidateScore> candidates;
  std::optional<ForestModel> best;
  double best_error = std::numeric_limits<double>::infinity();
  for (std::size_t mtry : grid) {
    ForestParams p = params;
    p.mtry = mtry;
    p.seed = derive_seed(params.seed, mtry);
    ForestModel forest = fit_random_forest(data, p);
    CandidateScore c;
    c.label = "mtry=" + std::to_string(mtry);
    c.hyperparameters = {{"mtry", mtry}, {"n_trees", p.n_trees}, {"min_node_size", p.min_node_size}};
    c.train_error = rmse(data.responses, forest.predict(data.covariates));
    c.validation_error = forest.oob_rmse();
    if (c.validation_error < best_error || !best) {
      best_error = c.validation_error;
      best = std::move(forest);
    }
    candidates.push_back(std::move(c));
  }
  ForestSelection out;
  out.report = select_min_validation(std::move(candidates));
  out.report.model = "RF";
  out.report.criterion = "oob-rmse";
  out.model = std::move(*best);
  return out;
}

std::string model_name(const MeanModel& model) {
  return std::visit(Overloaded{[](const RidgeModel&) { return std::string("LM"); },
                               [](const ForestModel&) { return std::string("RF"); },
                               [](const BoostModel&) { return std::string("GB"); }},
                    model);
}

std::vector<double> predict(const MeanModel& model, const Eigen::MatrixXd& covariates) {
  return std::visit([&](const auto& m) { return m.predict(covariates); }, model);
}

FittedValues training_fitted_values(const MeanModel& model, const Dataset& data) {
  data.validate();
  return std::visit(
      Overloaded{
          [&](const ForestModel& forest) {
            require(forest.training_rows == data.rows(), ErrorCode::kInvalidInput,
                    "forest was fitted on a different number of rows");
            FittedValues out;
            out.values = forest.oob_predictions;
            for (std::size_t i = 0; i < out.values.size(); ++i) {
              if (!forest.oob_missing[i]) continue;
              out.values[i] = forest.predict_row(data.covariates, static_cast<Eigen::Index>(i));
              ++out.substituted;
            }
            return out;
          },
          [&](const auto& m) {
            require(m.training_rows == data.rows(), ErrorCode::kInvalidInput,
                    "model was fitted on a different number of rows");
            return FittedValues{m.predict(data.covariates), 0};
          }},
      model);
}

}  // namespace condquant
