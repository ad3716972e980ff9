#include "condquant/ridge.hpp"

#include <cmath>

#include "condquant/error.hpp"

namespace condquant {

double RidgeModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return intercept + x.dot(coefficients);
}

std::vector<double> RidgeModel::predict(const Eigen::MatrixXd& covariates) const {
  require(covariates.cols() == coefficients.size(), ErrorCode::kInvalidInput,
          "covariate column count does not match the ridge model");
  const Eigen::VectorXd fitted =
      (covariates * coefficients).array() + intercept;
  return {fitted.data(), fitted.data() + fitted.size()};
}

RidgeModel fit_ridge(const Dataset& data, double penalty) {
  data.validate();
  require(std::isfinite(penalty) && penalty >= 0.0, ErrorCode::kInvalidInput,
          "ridge penalty must be finite and non-negative");
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto p = data.covariates.cols();

  RidgeModel model;
  model.penalty = penalty;
  model.training_rows = data.rows();
  model.standardization = Standardizer::fit(data.covariates);
  const Eigen::MatrixXd z = model.standardization.apply(data.covariates);

  const Eigen::Map<const Eigen::VectorXd> y(data.responses.data(), n);
  const double y_mean = y.mean();

  // Augmented least squares [Z; sqrt((n-1) penalty) I] b = [y - mean; 0].
  // The complete orthogonal decomposition yields the minimum-norm solution
  // when penalty = 0 and Z is rank deficient.
  Eigen::MatrixXd design(n + p, p);
  design.topRows(n) = z;
  design.bottomRows(p) =
      Eigen::MatrixXd::Identity(p, p) * std::sqrt(static_cast<double>(n - 1) * penalty);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(n + p);
  target.head(n) = y.array() - y_mean;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  model.standardized_coefficients = cod.solve(target);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (model.standardization.is_constant(j)) model.standardized_coefficients[j] = 0.0;
  }
  require(model.standardized_coefficients.allFinite(), ErrorCode::kNumericalFailure,
          "ridge solution is not finite");

  model.coefficients =
      model.standardized_coefficients.array() / model.standardization.scale.array();
  model.intercept = y_mean - model.coefficients.dot(model.standardization.center);
  return model;
}

double largest_covariance_eigenvalue(const Dataset& data) {
  data.validate();
  const Standardizer s = Standardizer::fit(data.covariates);
  const Eigen::MatrixXd z = s.apply(data.covariates);
  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorCode::kNumericalFailure,
          "covariance eigendecomposition failed");
  return solver.eigenvalues().maxCoeff();
}

std::vector<double> ridge_penalty_grid(const Dataset& data, std::size_t grid_size) {
  require(grid_size >= 1, ErrorCode::kInvalidInput, "ridge grid size must be positive");
  const double top = largest_covariance_eigenvalue(data);
  std::vector<double> grid(grid_size, 0.0);
  if (grid_size == 1) return grid;
  for (std::size_t k = 0; k < grid_size; ++k) {
    grid[k] = top * static_cast<double>(k) / static_cast<double>(grid_size - 1);
  }
  grid.back() = top;
  return grid;
}

}  // namespace condquant
