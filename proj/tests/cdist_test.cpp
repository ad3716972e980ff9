#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "condquant/cdist.hpp"
#include "condquant/error.hpp"
#include "oracles.hpp"

using namespace condquant;

namespace {

struct Instance {
  std::vector<double> fitted;
  std::vector<double> responses;
};

Instance random_instance(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = z(rng);
    inst.fitted.push_back(mu);
    inst.responses.push_back(mu + 0.5 * z(rng));
  }
  return inst;
}

// Equal fitted values give uniform weights for every query.
ConditionalDistributionModel uniform_model(std::vector<double> responses) {
  std::vector<double> fitted(responses.size(), 0.0);
  return ConditionalDistributionModel(std::move(fitted), std::move(responses),
                                      KernelSpec::gaussian(), 1.0);
}

}  // namespace

TEST(Weights, EqualFittedValuesGiveHalfHalf) {
  ConditionalDistributionModel m({2.0, 2.0}, {0.0, 1.0}, KernelSpec::gaussian(), 0.3);
  for (double q : {-5.0, 2.0, 40.0}) {
    const auto w = m.weights(q).weights;
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], 0.5);
  }
}

TEST(Weights, IsolatedPointTakesAllMass) {
  ConditionalDistributionModel m({0.0, 10.0, 20.0}, {1.0, 2.0, 3.0}, KernelSpec::gaussian(), 0.5);
  const auto w = m.weights(10.0).weights;
  EXPECT_NEAR(w[1], 1.0, 1e-12);
}

TEST(Weights, MatchScalarLoop) {
  const Instance inst = random_instance(3, 50);
  for (auto spec : {KernelSpec::gaussian(), KernelSpec::poly_exponential(2)}) {
    ConditionalDistributionModel m(inst.fitted, inst.responses, spec, 0.3);
    for (double q : {-1.3, 0.0, 0.77}) {
      const auto w = m.weights(q).weights;
      const auto expected = oracle::scalar_weights(spec, inst.fitted, q, 0.3);
      double total = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_NEAR(w[i], expected[i], 1e-12);
        EXPECT_GT(w[i], 0.0);
        total += w[i];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Weights, NonIncreasingInDistance) {
  const Instance inst = random_instance(8, 60);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::poly_exponential(1), 0.4);
  const double q = 0.2;
  const auto w = m.weights(q).weights;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (std::abs(inst.fitted[i] - q) < std::abs(inst.fitted[j] - q)) EXPECT_GE(w[i], w[j]);
    }
  }
}

TEST(Weights, UnderflowFallsBackToNearest) {
  ConditionalDistributionModel m({0.0, 1.0, 3.0}, {5.0, 6.0, 7.0}, KernelSpec::gaussian(), 1e-3);
  const WeightVector w = m.weights(100.0);
  EXPECT_TRUE(w.fallback);
  EXPECT_DOUBLE_EQ(w.weights[2], 1.0);
  EXPECT_DOUBLE_EQ(w.weights[0], 0.0);
  const QuantileCurve c = m.quantile_curve(100.0, std::vector<double>{0.1, 0.9});
  EXPECT_TRUE(c.fallback);
  // Knots (0, 5), (0, 6), (1, 7): linear between the last two.
  EXPECT_NEAR(c.values[0], 6.1, 1e-12);
  EXPECT_NEAR(c.values[1], 6.9, 1e-12);
}

TEST(Weights, NonFiniteQueryRejected) {
  ConditionalDistributionModel m({0.0, 1.0}, {0.0, 1.0}, KernelSpec::gaussian(), 1.0);
  EXPECT_THROW(m.weights(NAN), Error);
}

TEST(Model, ConstructorContracts) {
  EXPECT_THROW(ConditionalDistributionModel({0.0}, {1.0}, KernelSpec::gaussian(), 1.0), Error);
  EXPECT_THROW(ConditionalDistributionModel({0.0, 1.0}, {1.0}, KernelSpec::gaussian(), 1.0), Error);
  EXPECT_THROW(ConditionalDistributionModel({0.0, 1.0}, {1.0, 2.0}, KernelSpec::gaussian(), 0.0), Error);
}

TEST(Model, SortIndexIsPermutation) {
  const Instance inst = random_instance(1, 40);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::gaussian(), 0.3);
  std::vector<std::size_t> idx(m.sort_index().begin(), m.sort_index().end());
  for (std::size_t k = 1; k < idx.size(); ++k) {
    EXPECT_LE(inst.fitted[idx[k - 1]], inst.fitted[idx[k]]);
  }
  std::sort(idx.begin(), idx.end());
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(idx[k], k);
}

TEST(WeightedAverage, ConstantResponses) {
  ConditionalDistributionModel m({0.0, 1.0, 2.0}, {4.5, 4.5, 4.5}, KernelSpec::gaussian(), 0.7);
  EXPECT_NEAR(m.weighted_average(0.3, [](double y) { return y; }), 4.5, 1e-14);
}

TEST(WeightedAverage, IndicatorEqualsCdf) {
  const Instance inst = random_instance(12, 30);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::gaussian(), 0.25);
  const double t = 0.1;
  EXPECT_NEAR(m.weighted_average(0.4, [&](double y) { return y <= t ? 1.0 : 0.0; }),
              m.cdf(0.4, t), 1e-15);
}

TEST(WeightedAverage, SquareMatchesScalarLoop) {
  const Instance inst = random_instance(20, 20);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::gaussian(), 0.3);
  const auto w = oracle::scalar_weights(KernelSpec::gaussian(), inst.fitted, -0.2, 0.3);
  std::vector<double> sq(inst.responses.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = inst.responses[i] * inst.responses[i];
  EXPECT_NEAR(m.weighted_average(-0.2, [](double y) { return y * y; }),
              oracle::scalar_weighted_average(w, sq), 1e-12);
}

TEST(WeightedAverage, BatchMatchesScalar) {
  const Instance inst = random_instance(21, 300);
  for (auto spec : {KernelSpec::gaussian(), KernelSpec::poly_exponential(3)}) {
    ConditionalDistributionModel m(inst.fitted, inst.responses, spec, 0.2);
    const std::vector<double> q{-2.0, -0.5, 0.0, 0.1, 1.7};
    const auto batch = m.weighted_average_batch(q, [](double y) { return y; });
    const auto cdfs = m.cdf_batch(q, 0.25);
    for (std::size_t j = 0; j < q.size(); ++j) {
      EXPECT_NEAR(batch[j], m.weighted_average(q[j], [](double y) { return y; }), 1e-10);
      EXPECT_NEAR(cdfs[j], m.cdf(q[j], 0.25), 1e-10);
    }
  }
}

TEST(Cdf, UniformCounting) {
  const auto m = uniform_model({1.0, 2.0, 3.0});
  EXPECT_NEAR(m.cdf(0.0, 2.0), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(m.cdf(0.0, 0.999), 0.0);
  EXPECT_EQ(m.cdf(0.0, 3.0), 1.0);
  EXPECT_EQ(m.cdf(0.0, 1e9), 1.0);
}

TEST(Cdf, MatchesScalarLoop) {
  const Instance inst = random_instance(30, 30);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::gaussian(), 0.3);
  const auto w = oracle::scalar_weights(KernelSpec::gaussian(), inst.fitted, 0.5, 0.3);
  for (double y : {-2.0, -0.3, 0.0, 0.4, 1.1, 3.0}) {
    EXPECT_NEAR(m.cdf(0.5, y), oracle::scalar_cdf(w, inst.responses, y), 1e-12);
  }
}

TEST(Cdf, StrictlyIncreasesAcrossEachKnot) {
  const Instance inst = random_instance(31, 25);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::gaussian(), 0.3);
  const auto f = m.knot_cdf(0.1);
  for (std::size_t j = 1; j < f.size(); ++j) EXPECT_GT(f[j], f[j - 1]);
  EXPECT_EQ(f.back(), 1.0);
}

TEST(Quantile, ExactKnot) {
  const auto m = uniform_model({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(m.quantile(0.0, 1.0 / 3.0), 1.0);
}

TEST(Quantile, MidpointInterpolation) {
  const auto m = uniform_model({1.0, 2.0, 3.0});
  EXPECT_NEAR(m.quantile(0.0, 0.5), 1.5, 1e-14);
}

TEST(Quantile, ClampsBelowFirstKnot) {
  const auto m = uniform_model({1.0, 2.0, 3.0});
  EXPECT_EQ(m.quantile(0.0, 0.01), 1.0);
  EXPECT_NEAR(m.quantile(0.0, 0.999), 2.0 + (0.999 - 2.0 / 3.0) * 3.0, 1e-12);
}

TEST(Quantile, RejectsAlphaOutsideUnitInterval) {
  const auto m = uniform_model({1.0, 2.0, 3.0});
  EXPECT_THROW(m.quantile(0.0, 0.0), Error);
  EXPECT_THROW(m.quantile(0.0, 1.0), Error);
}

TEST(Quantile, TiedResponsesMergeIntoOneKnot) {
  const auto m = uniform_model({1.0, 1.0, 2.0, 3.0});
  EXPECT_EQ(m.knots().size(), 3u);
  EXPECT_NEAR(m.knot_cdf(0.0)[0], 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(m.quantile(0.0, 0.5), 1.0);
}

TEST(Quantile, InverseOfCdfAtEveryKnot) {
  const Instance inst = random_instance(41, 40);
  ConditionalDistributionModel m(inst.fitted, inst.responses, KernelSpec::gaussian(), 0.4);
  const auto values = m.knots().values();
  for (double y : values) {
    const double f = m.cdf(0.3, y);
    if (f >= 1.0) continue;
    EXPECT_EQ(m.quantile(0.3, f), y);
  }
}

TEST(Interval, CentralHalfOfUniformResponses) {
  std::vector<double> y(100);
  std::iota(y.begin(), y.end(), 1.0);
  const auto m = uniform_model(y);
  const QuantileBand band = m.prediction_interval(0.0, 0.25);
  EXPECT_NEAR(band.lower, oracle::lower_weighted_quantile(y, 0.25), 1.0);
  EXPECT_NEAR(band.upper, oracle::lower_weighted_quantile(y, 0.75), 1.0);
  EXPECT_LE(band.lower, band.upper);
}

TEST(Interval, SmallAlphaApproachesRange) {
  std::vector<double> y{3.0, -1.0, 4.0, 1.5};
  const auto m = uniform_model(y);
  const QuantileBand band = m.prediction_interval(0.0, 1e-6);
  EXPECT_EQ(band.lower, -1.0);
  EXPECT_NEAR(band.upper, 4.0, 1e-5);
}

TEST(Interval, PointMass) {
  ConditionalDistributionModel m({0.0, 1.0, 2.0}, {7.0, 7.0, 7.0}, KernelSpec::gaussian(), 0.5);
  const QuantileBand band = m.prediction_interval(1.0, 0.05);
  EXPECT_EQ(band.lower, 7.0);
  EXPECT_EQ(band.upper, 7.0);
}

TEST(Interval, AlphaRange) {
  const auto m = uniform_model({1.0, 2.0, 3.0});
  EXPECT_THROW(m.prediction_interval(0.0, 0.5), Error);
  EXPECT_THROW(m.prediction_interval(0.0, 0.0), Error);
}

TEST(Fit, SilvermanBandwidthOnFittedValues) {
  const Instance inst = random_instance(50, 200);
  const auto m = ConditionalDistributionModel::fit(inst.fitted, inst.responses,
                                                   KernelSpec::gaussian(), BandwidthRule::silverman());
  EXPECT_DOUBLE_EQ(m.bandwidth(), silverman_bandwidth(inst.fitted));
  const auto fixed = ConditionalDistributionModel::fit(inst.fitted, inst.responses,
                                                       KernelSpec::gaussian(), BandwidthRule::fixed(0.125));
  EXPECT_EQ(fixed.bandwidth(), 0.125);
}

TEST(InvertCdf, KnotsAndInterpolation) {
  const std::vector<double> y{0.0, 10.0};
  const std::vector<double> f{0.2, 1.0};
  EXPECT_EQ(invert_cdf(y, f, 0.1), 0.0);
  EXPECT_EQ(invert_cdf(y, f, 0.2), 0.0);
  EXPECT_NEAR(invert_cdf(y, f, 0.6), 5.0, 1e-14);
  EXPECT_NEAR(invert_cdf(y, f, 0.999), 9.9875, 1e-12);
  EXPECT_THROW(invert_cdf(y, f, 1.0), Error);
}
