#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "condquant/kernels.hpp"

namespace condquant {

// Distinct sorted response values together with the grouping needed to turn
// per-observation weights into CDF values at each distinct value. Shared by
// the kernel estimator and by leaf-co-occurrence (QRF) weights.
class ResponseKnots {
 public:
  explicit ResponseKnots(std::span<const double> responses);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  std::size_t observations() const { return order_.size(); }

  // F_j = sum of weights over observations with response <= values()[j].
  // The last entry is pinned to exactly 1 and the sequence is non-decreasing.
  std::vector<double> cumulative(std::span<const double> weights) const;

 private:
  std::vector<double> values_;
  std::vector<std::size_t> order_;     // observation indices sorted by response
  std::vector<std::size_t> knot_end_;  // exclusive end in order_ of each knot
};

// Piecewise-linear inverse of the step CDF through the points (F_j, y_j),
// clamped to the first/last knot outside [F_1, F_d].
double invert_cdf(std::span<const double> knot_values, std::span<const double> knot_cdf,
                  double alpha);

struct QuantileBand {
  double alpha = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct WeightVector {
  std::vector<double> weights;
  // Set when every raw kernel value underflowed and the weights fell back to
  // uniform mass on the nearest fitted value(s).
  bool fallback = false;
};

struct QuantileCurve {
  std::vector<double> values;  // one per requested alpha
  bool fallback = false;
};

// Kernel smoother over the one-dimensional fitted values of a mean model:
//
//   w_i(q) = K((mu_i - q) / h) / sum_j K((mu_j - q) / h)
//   F(y | q) = sum_i w_i(q) I(y_i <= y)
//
// Immutable after construction; every query is a pure function.
class ConditionalDistributionModel {
 public:
  ConditionalDistributionModel(std::vector<double> train_fitted,
                               std::vector<double> train_responses, KernelSpec kernel,
                               double bandwidth);

  // Resolves the bandwidth rule on the training fitted values.
  static ConditionalDistributionModel fit(std::vector<double> train_fitted,
                                          std::vector<double> train_responses,
                                          KernelSpec kernel, const BandwidthRule& rule);

  std::span<const double> train_fitted() const { return fitted_; }
  std::span<const double> train_responses() const { return responses_; }
  std::span<const std::size_t> sort_index() const { return sort_index_; }
  const KernelSpec& kernel() const { return kernel_; }
  double bandwidth() const { return bandwidth_; }
  std::size_t size() const { return fitted_.size(); }
  const ResponseKnots& knots() const { return knots_; }

  WeightVector weights(double query_fitted) const;

  double weighted_average(double query_fitted,
                          const std::function<double(double)>& transform) const;

  double cdf(double query_fitted, double y) const;

  // Knot CDF values for one query: one weight pass, one accumulation pass.
  std::vector<double> knot_cdf(double query_fitted) const;

  double quantile(double query_fitted, double alpha) const;
  QuantileCurve quantile_curve(double query_fitted, std::span<const double> alphas) const;

  QuantileBand prediction_interval(double query_fitted, double alpha) const;

  // Batched Nadaraya-Watson averages over many queries via weighted_kernel_sums;
  // the fast exact path applies for poly-exponential kernels.
  std::vector<double> weighted_average_batch(
      std::span<const double> queries, const std::function<double(double)>& transform) const;
  std::vector<double> cdf_batch(std::span<const double> queries, double y) const;

 private:
  std::vector<double> ratio_batch(std::span<const double> queries,
                                  std::span<const double> numerator_coefficients,
                                  const std::function<double(double)>& transform) const;

  std::vector<double> fitted_;
  std::vector<double> responses_;
  std::vector<std::size_t> sort_index_;
  std::vector<double> sorted_fitted_;
  KernelSpec kernel_;
  double bandwidth_;
  ResponseKnots knots_;
};

}  // namespace condquant
