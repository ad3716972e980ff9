#include "condquant/cdist.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>

#include "condquant/error.hpp"

namespace condquant {

ResponseKnots::ResponseKnots(std::span<const double> responses) {
  order_.resize(responses.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return responses[a] < responses[b]; });
  for (std::size_t k = 0; k < order_.size(); ++k) {
    const double y = responses[order_[k]];
    if (values_.empty() || y != values_.back()) {
      if (!values_.empty()) knot_end_.push_back(k);
      values_.push_back(y);
    }
  }
  if (!values_.empty()) knot_end_.push_back(order_.size());
}

std::vector<double> ResponseKnots::cumulative(std::span<const double> weights) const {
  require(weights.size() == order_.size(), ErrorCode::kInvalidInput,
          "weight vector length does not match the number of observations");
  std::vector<double> cdf(values_.size());
  double running = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < values_.size(); ++j) {
    for (; k < knot_end_[j]; ++k) running += weights[order_[k]];
    cdf[j] = std::min(running, 1.0);
  }
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}

double invert_cdf(std::span<const double> knot_values, std::span<const double> knot_cdf,
                  double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  require(!knot_values.empty() && knot_values.size() == knot_cdf.size(),
          ErrorCode::kInvalidInput, "knot table is empty or inconsistent");
  if (alpha <= knot_cdf.front()) return knot_values.front();
  const auto it = std::lower_bound(knot_cdf.begin(), knot_cdf.end(), alpha);
  if (it == knot_cdf.end()) return knot_values.back();
  const auto j = static_cast<std::size_t>(it - knot_cdf.begin());
  if (*it == alpha) return knot_values[j];
  // knot_cdf[j - 1] < alpha < knot_cdf[j]
  const double f_lo = knot_cdf[j - 1];
  const double f_hi = knot_cdf[j];
  const double y_lo = knot_values[j - 1];
  const double y_hi = knot_values[j];
  const double t = (alpha - f_lo) / (f_hi - f_lo);
  return std::clamp(y_lo + t * (y_hi - y_lo), y_lo, y_hi);
}

ConditionalDistributionModel::ConditionalDistributionModel(std::vector<double> train_fitted,
                                                           std::vector<double> train_responses,
                                                           KernelSpec kernel, double bandwidth)
    : fitted_(std::move(train_fitted)),
      responses_(std::move(train_responses)),
      kernel_(kernel),
      bandwidth_(bandwidth),
      knots_(responses_) {
  require(fitted_.size() == responses_.size(), ErrorCode::kInvalidInput,
          "fitted values and responses differ in length");
  require(fitted_.size() >= 2, ErrorCode::kInvalidInput,
          "conditional distribution model needs at least two training points");
  require(std::isfinite(bandwidth_) && bandwidth_ > 0.0, ErrorCode::kInvalidInput,
          "bandwidth must be positive and finite");
  for (std::size_t i = 0; i < fitted_.size(); ++i) {
    require(std::isfinite(fitted_[i]) && std::isfinite(responses_[i]), ErrorCode::kInvalidInput,
            "non-finite training pair at index " + std::to_string(i));
  }
  sort_index_.resize(fitted_.size());
  std::iota(sort_index_.begin(), sort_index_.end(), std::size_t{0});
  std::stable_sort(sort_index_.begin(), sort_index_.end(),
                   [&](std::size_t a, std::size_t b) { return fitted_[a] < fitted_[b]; });
  sorted_fitted_.reserve(fitted_.size());
  for (std::size_t i : sort_index_) sorted_fitted_.push_back(fitted_[i]);
}

ConditionalDistributionModel ConditionalDistributionModel::fit(std::vector<double> train_fitted,
                                                               std::vector<double> train_responses,
                                                               KernelSpec kernel,
                                                               const BandwidthRule& rule) {
  const double h = resolve_bandwidth(rule, train_fitted);
  return ConditionalDistributionModel(std::move(train_fitted), std::move(train_responses),
                                      kernel, h);
}

WeightVector ConditionalDistributionModel::weights(double query_fitted) const {
  require(std::isfinite(query_fitted), ErrorCode::kInvalidInput, "query fitted value is not finite");
  WeightVector out;
  out.weights.resize(fitted_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < fitted_.size(); ++i) {
    const double k = kernel_eval(kernel_, (fitted_[i] - query_fitted) / bandwidth_);
    out.weights[i] = k;
    total += k;
  }
  if (total > 0.0 && std::isfinite(total)) {
    for (double& w : out.weights) w /= total;
    return out;
  }

  // Every kernel value underflowed: put uniform mass on the nearest fitted value(s).
  out.fallback = true;
  const auto pos = std::lower_bound(sorted_fitted_.begin(), sorted_fitted_.end(), query_fitted);
  double nearest_distance = std::numeric_limits<double>::infinity();
  if (pos != sorted_fitted_.end()) nearest_distance = *pos - query_fitted;
  if (pos != sorted_fitted_.begin()) {
    nearest_distance = std::min(nearest_distance, query_fitted - *std::prev(pos));
  }
  std::size_t ties = 0;
  for (std::size_t i = 0; i < fitted_.size(); ++i) {
    const bool nearest = std::abs(fitted_[i] - query_fitted) == nearest_distance;
    out.weights[i] = nearest ? 1.0 : 0.0;
    ties += nearest ? 1 : 0;
  }
  for (double& w : out.weights) w /= static_cast<double>(ties);
  return out;
}

double ConditionalDistributionModel::weighted_average(
    double query_fitted, const std::function<double(double)>& transform) const {
  const WeightVector w = weights(query_fitted);
  double acc = 0.0;
  for (std::size_t i = 0; i < responses_.size(); ++i) acc += w.weights[i] * transform(responses_[i]);
  return acc;
}

std::vector<double> ConditionalDistributionModel::knot_cdf(double query_fitted) const {
  return knots_.cumulative(weights(query_fitted).weights);
}

double ConditionalDistributionModel::cdf(double query_fitted, double y) const {
  require(std::isfinite(y), ErrorCode::kInvalidInput, "CDF argument is not finite");
  const auto values = knots_.values();
  const auto it = std::upper_bound(values.begin(), values.end(), y);
  if (it == values.begin()) {
    weights(query_fitted);  // validates the query
    return 0.0;
  }
  const std::vector<double> f = knot_cdf(query_fitted);
  return f[static_cast<std::size_t>(it - values.begin()) - 1];
}

double ConditionalDistributionModel::quantile(double query_fitted, double alpha) const {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  const std::vector<double> f = knot_cdf(query_fitted);
  return invert_cdf(knots_.values(), f, alpha);
}

QuantileCurve ConditionalDistributionModel::quantile_curve(double query_fitted,
                                                           std::span<const double> alphas) const {
  for (double a : alphas) {
    require(a > 0.0 && a < 1.0, ErrorCode::kInvalidInput,
            "quantile level must lie strictly between 0 and 1");
  }
  const WeightVector w = weights(query_fitted);
  const std::vector<double> f = knots_.cumulative(w.weights);
  QuantileCurve curve;
  curve.fallback = w.fallback;
  curve.values.reserve(alphas.size());
  for (double a : alphas) curve.values.push_back(invert_cdf(knots_.values(), f, a));
  return curve;
}

QuantileBand ConditionalDistributionModel::prediction_interval(double query_fitted,
                                                               double alpha) const {
  require(alpha > 0.0 && alpha < 0.5, ErrorCode::kInvalidInput,
          "interval tail probability must lie strictly between 0 and 0.5");
  const std::vector<double> f = knot_cdf(query_fitted);
  QuantileBand band;
  band.alpha = alpha;
  band.lower = invert_cdf(knots_.values(), f, alpha);
  band.upper = invert_cdf(knots_.values(), f, 1.0 - alpha);
  return band;
}

std::vector<double> ConditionalDistributionModel::ratio_batch(
    std::span<const double> queries, std::span<const double> numerator_coefficients,
    const std::function<double(double)>& transform) const {
  const std::vector<double> ones(sorted_fitted_.size(), 1.0);
  std::vector<double> numerator =
      weighted_kernel_sums(kernel_, sorted_fitted_, numerator_coefficients, queries, bandwidth_);
  const std::vector<double> denominator =
      weighted_kernel_sums(kernel_, sorted_fitted_, ones, queries, bandwidth_);
  for (std::size_t j = 0; j < queries.size(); ++j) {
    if (denominator[j] > 0.0) {
      numerator[j] /= denominator[j];
    } else {
      numerator[j] = weighted_average(queries[j], transform);
    }
  }
  return numerator;
}

std::vector<double> ConditionalDistributionModel::weighted_average_batch(
    std::span<const double> queries, const std::function<double(double)>& transform) const {
  std::vector<double> coefficients;
  coefficients.reserve(sort_index_.size());
  for (std::size_t i : sort_index_) coefficients.push_back(transform(responses_[i]));
  return ratio_batch(queries, coefficients, transform);
}

std::vector<double> ConditionalDistributionModel::cdf_batch(std::span<const double> queries,
                                                            double y) const {
  require(std::isfinite(y), ErrorCode::kInvalidInput, "CDF argument is not finite");
  auto indicator = [y](double v) { return v <= y ? 1.0 : 0.0; };
  std::vector<double> coefficients;
  coefficients.reserve(sort_index_.size());
  for (std::size_t i : sort_index_) coefficients.push_back(indicator(responses_[i]));
  std::vector<double> out = ratio_batch(queries, coefficients, indicator);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace condquant
