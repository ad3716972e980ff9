#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace condquant {

// Covariate matrix (n x p) paired with n responses.
struct Dataset {
  Eigen::MatrixXd covariates;
  std::vector<double> responses;
  std::vector<std::string> feature_names;

  std::size_t rows() const { return responses.size(); }
  std::size_t cols() const { return static_cast<std::size_t>(covariates.cols()); }

  // n >= 2, p >= 1, shapes agree, every entry finite.
  void validate() const;

  Dataset subset(std::span<const std::size_t> row_indices) const;
};

Dataset make_dataset(Eigen::MatrixXd covariates, std::vector<double> responses,
                     std::vector<std::string> feature_names = {});

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& matrix, std::span<const std::size_t> rows);

// Per-feature centring and scaling by training statistics (sample sd, n - 1).
// Constant columns keep scale 1 and therefore standardize to zero.
struct Standardizer {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& covariates);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& covariates) const;
  bool is_constant(Eigen::Index column) const { return constant_[column]; }

 private:
  std::vector<bool> constant_;
};

double mean(std::span<const double> values);
double sample_sd(std::span<const double> values);
double rmse(std::span<const double> truth, std::span<const double> predicted);

// Lower empirical quantile y_(ceil(n alpha)) of the (unsorted) values.
double empirical_quantile(std::span<const double> values, double alpha);

}  // namespace condquant

namespace condquant {

// Check (pinball) loss of predicting q for an observation y:
//   (1 - alpha)(q - y) if y < q, alpha (y - q) otherwise.
inline double pinball_loss(double y, double q, double alpha) {
  return y < q ? (1.0 - alpha) * (q - y) : alpha * (y - q);
}

// Negative derivative of pinball_loss with respect to q: alpha when the
// prediction is at or below the observation, alpha - 1 when above it.
inline double pinball_negative_gradient(double y, double q, double alpha) {
  return y >= q ? alpha : alpha - 1.0;
}

}  // namespace condquant
