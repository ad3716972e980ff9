#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "condquant/dataset.hpp"

namespace condquant {

// Linear mean model fitted on standardized covariates. The penalty is on the
// covariance scale: with standardized design Z the coefficients solve
//
//   (Z'Z / (n - 1) + penalty I) b = Z'(y - mean(y)) / (n - 1)
//
// so a penalty equal to the largest covariance eigenvalue halves the
// contribution of the leading principal component.
struct RidgeModel {
  Eigen::VectorXd coefficients;           // original covariate scale
  double intercept = 0.0;                 // original covariate scale
  Eigen::VectorXd standardized_coefficients;
  double penalty = 0.0;
  Standardizer standardization;
  std::size_t training_rows = 0;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<double> predict(const Eigen::MatrixXd& covariates) const;
};

RidgeModel fit_ridge(const Dataset& data, double penalty);

// Largest eigenvalue of the sample covariance of the standardized covariates.
double largest_covariance_eigenvalue(const Dataset& data);

// grid_size evenly spaced penalties from 0 to the largest covariance
// eigenvalue, both inclusive.
std::vector<double> ridge_penalty_grid(const Dataset& data, std::size_t grid_size);

}  // namespace condquant
