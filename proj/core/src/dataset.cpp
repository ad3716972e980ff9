#include "condquant/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "condquant/error.hpp"

namespace condquant {

void Dataset::validate() const {
  require(static_cast<std::size_t>(covariates.rows()) == responses.size(),
          ErrorCode::kInvalidInput, "covariate rows and response length differ");
  require(responses.size() >= 2, ErrorCode::kInvalidInput, "dataset needs at least two rows");
  require(covariates.cols() >= 1, ErrorCode::kInvalidInput, "dataset needs at least one covariate");
  require(feature_names.empty() || feature_names.size() == cols(), ErrorCode::kInvalidInput,
          "feature name count does not match covariate columns");
  require(covariates.allFinite(), ErrorCode::kInvalidInput, "covariates contain non-finite values");
  for (double y : responses) {
    require(std::isfinite(y), ErrorCode::kInvalidInput, "responses contain non-finite values");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices) const {
  Dataset out;
  out.covariates = select_rows(covariates, row_indices);
  out.responses.reserve(row_indices.size());
  for (std::size_t i : row_indices) out.responses.push_back(responses[i]);
  out.feature_names = feature_names;
  return out;
}

Dataset make_dataset(Eigen::MatrixXd covariates, std::vector<double> responses,
                     std::vector<std::string> feature_names) {
  Dataset data{std::move(covariates), std::move(responses), std::move(feature_names)};
  data.validate();
  return data;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& matrix, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), matrix.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = matrix.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& covariates) {
  Standardizer s;
  const auto n = static_cast<double>(covariates.rows());
  s.center = covariates.colwise().mean().transpose();
  s.scale.resize(covariates.cols());
  s.constant_.assign(static_cast<std::size_t>(covariates.cols()), false);
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
    const double ss = (covariates.col(j).array() - s.center[j]).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(s.center[j])));
    s.constant_[static_cast<std::size_t>(j)] = constant;
    s.scale[j] = constant ? 1.0 : sd;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& covariates) const {
  require(covariates.cols() == center.size(), ErrorCode::kInvalidInput,
          "covariate column count does not match the fitted standardization");
  Eigen::MatrixXd z = (covariates.rowwise() - center.transpose()).array().rowwise() /
                      scale.transpose().array();
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (constant_[static_cast<std::size_t>(j)]) z.col(j).setZero();
  }
  return z;
}

double mean(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double rmse(std::span<const double> truth, std::span<const double> predicted) {
  require(truth.size() == predicted.size() && !truth.empty(), ErrorCode::kInvalidInput,
          "RMSE inputs must be non-empty and of equal length");
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - predicted[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

double empirical_quantile(std::span<const double> values, double alpha) {
  require(!values.empty(), ErrorCode::kInvalidInput, "empirical quantile of an empty sample");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  std::vector<double> copy(values.begin(), values.end());
  const auto n = copy.size();
  auto rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(rank - 1), copy.end());
  return copy[rank - 1];
}

}  // namespace condquant
