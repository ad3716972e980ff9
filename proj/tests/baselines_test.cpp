#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "condquant/error.hpp"
#include "condquant/baselines.hpp"
#include "condquant/ridge.hpp"
#include "oracles.hpp"

using namespace condquant;

namespace {

Dataset noisy_line(std::uint64_t seed, std::size_t n, std::size_t p) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::exponential_distribution<double> e(1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<double> y(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 1.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = z(rng);
      s += (j % 2 == 0 ? 1.5 : -0.75) * x(i, j);
    }
    y[static_cast<std::size_t>(i)] = s + e(rng);
  }
  return make_dataset(std::move(x), std::move(y));
}

// Forest with one tree fitted by hand and membership from routing every training point.
ForestModel forest_from_trees(std::vector<TreeModel> trees, const Dataset& d) {
  ForestModel f;
  f.training_rows = d.rows();
  f.train_responses = d.responses;
  for (const TreeModel& t : trees) {
    std::vector<std::vector<std::uint32_t>> leaves(t.leaf_count());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      leaves[t.leaf_index_row(d.covariates, static_cast<Eigen::Index>(i))].push_back(
          static_cast<std::uint32_t>(i));
    }
    f.membership.push_back(std::move(leaves));
    f.bootstrap_masks.emplace_back(d.rows(), true);
  }
  f.trees = std::move(trees);
  return f;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

}  // namespace

// --- linear quantile regression ----------------------------------------------

TEST(LinearQuantile, MatchesExhaustiveBasisSearch) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = noisy_line(seed, 40, 2);
    for (double alpha : {0.25, 0.5, 0.9}) {
      const LinearQuantileModel m = fit_linear_quantile(d, alpha);
      const double best = oracle::exhaustive_quantile_objective(d, alpha);
      const double achieved = linear_quantile_objective(d, alpha, m.intercept, m.coefficients);
      EXPECT_LE(achieved, best * (1.0 + 1e-4)) << "seed " << seed << " alpha " << alpha;
      EXPECT_NEAR(m.objective, achieved, 1e-9 * std::max(1.0, achieved));
    }
  }
}

TEST(LinearQuantile, ZeroCovariateGivesEmpiricalQuantile) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> y(21);
  for (double& v : y) v = z(rng);
  const Dataset d = make_dataset(Eigen::MatrixXd::Zero(21, 1), y);
  // n alpha = 6.3 is not an integer, so the minimizer is the 7th order statistic.
  const LinearQuantileModel m = fit_linear_quantile(d, 0.3);
  std::vector<double> s = y;
  std::sort(s.begin(), s.end());
  EXPECT_NEAR(m.intercept, s[6], 1e-8);
  EXPECT_NEAR(m.intercept, empirical_quantile(y, 0.3), 1e-8);
}

TEST(LinearQuantile, MedianRegressionRecoversSlope) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::MatrixXd x(2000, 1);
  std::vector<double> y(2000);
  for (int i = 0; i < 2000; ++i) {
    x(i, 0) = u(rng);
    y[static_cast<std::size_t>(i)] = 1.0 + 2.0 * x(i, 0) + 0.5 * z(rng);
  }
  const LinearQuantileModel m = fit_linear_quantile(make_dataset(x, y), 0.5);
  EXPECT_NEAR(m.coefficients[0], 2.0, 0.1);
  EXPECT_NEAR(m.intercept, 1.0, 0.1);
}

TEST(LinearQuantile, NeverWorseThanLeastSquaresLine) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const Dataset d = noisy_line(seed, 150, 3);
    const RidgeModel ols = fit_ridge(d, 0.0);
    for (double alpha : {0.05, 0.5, 0.975}) {
      const LinearQuantileModel m = fit_linear_quantile(d, alpha);
      EXPECT_LE(m.objective, linear_quantile_objective(d, alpha, ols.intercept, ols.coefficients) + 1e-9);
    }
  }
}

TEST(LinearQuantile, RejectsLevelOutsideUnitInterval) {
  const Dataset d = noisy_line(6, 20, 1);
  EXPECT_THROW(fit_linear_quantile(d, 0.0), Error);
  EXPECT_THROW(fit_linear_quantile(d, 1.0), Error);
}

TEST(LinearQuantile, ExhaustedBudgetCarriesBestIterate) {
  const Dataset d = noisy_line(7, 300, 3);
  LinearQuantileOptions options;
  options.max_iterations = 1;
  try {
    const LinearQuantileModel m = fit_linear_quantile(d, 0.1, options);
    // A vertex certificate can still close the fit; then the objective must be optimal.
    EXPECT_TRUE(std::isfinite(m.objective));
  } catch (const QuantileFitError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericalFailure);
    EXPECT_TRUE(e.best().coefficients.allFinite());
    EXPECT_TRUE(std::isfinite(e.best().objective));
  }
}

// --- quantile boosting -------------------------------------------------------

TEST(QuantileBoost, StageZeroIsEmpiricalQuantile) {
  const Dataset d = noisy_line(20, 200, 2);
  for (double alpha : {0.05, 0.5, 0.95}) {
    BoostParams params;
    params.max_trees = 3;
    const QuantileBoostModel m = fit_quantile_gbm(d, alpha, params);
    EXPECT_DOUBLE_EQ(m.initial_prediction, empirical_quantile(d.responses, alpha));
    for (double v : m.predict(d.covariates, 0)) EXPECT_DOUBLE_EQ(v, m.initial_prediction);
  }
}

TEST(QuantileBoost, FullSampleTrainingLossNonIncreasing) {
  const Dataset d = noisy_line(21, 200, 2);
  BoostParams params;
  params.max_trees = 50;
  params.subsample_fraction = 1.0;
  params.shrinkage = 0.1;
  const double alpha = 0.8;
  const QuantileBoostModel m = fit_quantile_gbm(d, alpha, params);
  double previous = INFINITY;
  m.staged_predict(d.covariates, 50, [&](std::size_t, std::span<const double> q) {
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) total += pinball_loss(d.responses[i], q[i], alpha);
    EXPECT_LE(total, previous + 1e-9);
    previous = total;
  });
}

TEST(QuantileBoost, MedianTracksSymmetricCenter) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(1000, 1);
  std::vector<double> y(1000);
  for (int i = 0; i < 1000; ++i) {
    x(i, 0) = i < 500 ? 0.0 : 1.0;
    y[static_cast<std::size_t>(i)] = (i < 500 ? -2.0 : 3.0) + z(rng);
  }
  BoostParams params;
  params.max_trees = 400;
  params.shrinkage = 0.05;
  params.depth = 1;
  const QuantileBoostModel m = fit_quantile_gbm(make_dataset(x, y), 0.5, params);
  Eigen::MatrixXd q(2, 1);
  q << 0.0, 1.0;
  const auto pred = m.predict(q);
  EXPECT_NEAR(pred[0], -2.0, 0.2);
  EXPECT_NEAR(pred[1], 3.0, 0.2);
}

TEST(QuantileBoost, NegativeGradientMatchesFiniteDifference) {
  const double h = 1e-7;
  for (double alpha : {0.05, 0.3, 0.5, 0.975}) {
    for (double y : {-1.0, 0.5, 2.0}) {
      for (double q : {-2.0, 0.0, 0.49, 3.0}) {
        const double fd = -(pinball_loss(y, q + h, alpha) - pinball_loss(y, q - h, alpha)) / (2 * h);
        EXPECT_NEAR(pinball_negative_gradient(y, q, alpha), fd, 1e-6);
      }
    }
  }
}

TEST(QuantileBoost, SelectionPicksMinimumValidationStage) {
  const Dataset d = noisy_line(23, 200, 2);
  BoostParams params;
  params.max_trees = 40;
  params.shrinkage = 0.1;
  const QuantileBoostSelection s = select_quantile_gbm(d, 0.25, params, 5, 1);
  ASSERT_EQ(s.report.candidates.size(), 40u);
  for (const auto& c : s.report.candidates) {
    EXPECT_GE(c.validation_error, s.report.chosen().validation_error);
  }
  EXPECT_EQ(s.model.n_trees, s.report.chosen_index + 1);
  EXPECT_DOUBLE_EQ(s.model.alpha, 0.25);
}

// --- quantile regression forest weights --------------------------------------

TEST(QrfWeights, SingleLeafCounting) {
  // Points 3 and 7 sit apart from the rest; a depth-one tree isolates them.
  Eigen::MatrixXd x(10, 1);
  std::vector<double> y(10, 0.0);
  for (int i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i % 5);
  x(3, 0) = 100.0;
  x(7, 0) = 101.0;
  y[3] = 10.0;
  y[7] = 12.0;
  const Dataset d = make_dataset(x, y);
  TreeModel t = fit_tree(d, 1, 1, all_rows(10), 1, 2);
  const ForestModel f = forest_from_trees({t}, d);
  Eigen::RowVectorXd query(1);
  query << 150.0;
  const auto w = qrf_weights(f, query);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(w[i], (i == 3 || i == 7) ? 0.5 : 0.0) << i;
  }
}

TEST(QrfWeights, MatchBruteForceTraversal) {
  const Dataset d = noisy_line(30, 150, 3);
  ForestParams params;
  params.n_trees = 25;
  params.seed = 2;
  const ForestModel f = fit_random_forest(d, params);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  for (int k = 0; k < 10; ++k) {
    Eigen::RowVectorXd q(3);
    for (Eigen::Index j = 0; j < 3; ++j) q[j] = z(rng);
    const auto w = qrf_weights(f, q);
    const auto expected = oracle::brute_force_qrf_weights(f, d.covariates, q);
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_NEAR(w[i], expected[i], 1e-12);
      EXPECT_GE(w[i], 0.0);
      total += w[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(QrfWeights, IdenticalTreesGiveSingleTreeWeights) {
  const Dataset d = noisy_line(32, 60, 2);
  const TreeModel stump = fit_tree(d, 1, 2, all_rows(60), 3);
  const ForestModel one = forest_from_trees({stump}, d);
  const ForestModel many = forest_from_trees({stump, stump, stump, stump}, d);
  Eigen::RowVectorXd q(2);
  q << 0.3, -0.4;
  const auto a = qrf_weights(one, q);
  const auto b = qrf_weights(many, q);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(QrfWeights, MissingMembershipRejected) {
  const Dataset d = noisy_line(33, 60, 2);
  ForestParams params;
  params.n_trees = 3;
  params.record_membership = false;
  const ForestModel f = fit_random_forest(d, params);
  Eigen::RowVectorXd q = Eigen::RowVectorXd::Zero(2);
  EXPECT_THROW(qrf_weights(f, q), Error);
}

TEST(QrfEstimator, QuantilesOrderedAndWithinResponseRange) {
  const Dataset d = noisy_line(34, 300, 3);
  ForestParams params;
  params.n_trees = 50;
  const ForestModel f = fit_random_forest(d, params);
  const QrfEstimator est(f);
  const auto& alphas = std::vector<double>{0.005, 0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975, 0.995};
  const auto [lo, hi] = std::minmax_element(d.responses.begin(), d.responses.end());
  for (Eigen::Index i = 0; i < 40; ++i) {
    const QuantileCurve c = est.quantile_curve(d.covariates.row(i), alphas);
    for (std::size_t k = 1; k < c.values.size(); ++k) EXPECT_LE(c.values[k - 1], c.values[k]);
    EXPECT_GE(c.values.front(), *lo);
    EXPECT_LE(c.values.back(), *hi);
  }
}
