#include <cmath>

#include "condquant/baselines.hpp"

namespace condquant {

std::vector<double> qrf_weights(const ForestModel& forest,
                                const Eigen::Ref<const Eigen::RowVectorXd>& query) {
  require(!forest.membership.empty(), ErrorCode::kInvalidInput,
          "forest was fitted without leaf membership");
  require(query.size() >= 1, ErrorCode::kInvalidInput, "empty query row");
  std::vector<double> w(forest.training_rows, 0.0);
  const double per_tree = 1.0 / static_cast<double>(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& members = forest.membership[t][forest.trees[t].leaf_index(query)];
    const double share = per_tree / static_cast<double>(members.size());
    for (std::uint32_t i : members) w[i] += share;
  }
  return w;
}

QrfEstimator::QrfEstimator(const ForestModel& forest)
    : forest_(forest), knots_(forest.train_responses) {}

QuantileCurve QrfEstimator::quantile_curve(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                           std::span<const double> alphas) const {
  const std::vector<double> cdf = knots_.cumulative(weights(query));
  QuantileCurve curve;
  curve.values.reserve(alphas.size());
  for (double a : alphas) curve.values.push_back(invert_cdf(knots_.values(), cdf, a));
  return curve;
}

QuantileBoostSelection select_quantile_gbm(const Dataset& data, double alpha,
                                           const BoostParams& params, std::size_t folds,
                                           std::uint64_t cv_seed) {
  const std::size_t stages = params.max_trees;
  auto mean_pinball = [alpha](std::span<const double> y, std::span<const double> q) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += pinball_loss(y[i], q[i], alpha);
    return total / static_cast<double>(y.size());
  };
  const std::vector<CvScore> scores = cross_validate(
      data,
      [&](const Dataset& train, const Dataset& validation) {
        const QuantileBoostModel m = fit_quantile_gbm(train, alpha, params);
        std::vector<CvScore> out(stages);
        m.staged_predict(train.covariates, stages, [&](std::size_t s, std::span<const double> p) {
          if (s > 0) out[s - 1].train_error = mean_pinball(train.responses, p);
        });
        m.staged_predict(validation.covariates, stages,
                         [&](std::size_t s, std::span<const double> p) {
                           if (s > 0) out[s - 1].validation_error = mean_pinball(validation.responses, p);
                         });
        return out;
      },
      folds, cv_seed);

  std::vector<CandidateScore> candidates;
  candidates.reserve(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    CandidateScore c;
    c.label = "trees=" + std::to_string(s + 1);
    c.hyperparameters = {{"n_trees", s + 1}, {"alpha", alpha}};
    c.train_error = scores[s].train_error;
    c.validation_error = scores[s].validation_error;
    candidates.push_back(std::move(c));
  }
  QuantileBoostSelection out;
  out.report = select_min_validation(std::move(candidates));
  out.report.model = "QGB";
  out.report.criterion = "cv" + std::to_string(folds) + "-pinball";
  out.model = fit_quantile_gbm(data, alpha, params);
  out.model.n_trees = out.report.chosen_index + 1;
  return out;
}

}  // namespace condquant
