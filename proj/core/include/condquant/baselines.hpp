#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "condquant/boost.hpp"
#include "condquant/cdist.hpp"
#include "condquant/dataset.hpp"
#include "condquant/error.hpp"
#include "condquant/forest.hpp"
#include "condquant/selection.hpp"

namespace condquant {

// Direct linear quantile regression: affine minimizer of the summed pinball loss.
struct LinearQuantileModel {
  Eigen::VectorXd coefficients;  // original covariate scale
  double intercept = 0.0;
  double alpha = 0.5;
  double objective = 0.0;  // summed pinball loss at the solution
  std::size_t iterations = 0;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return intercept + x.dot(coefficients);
  }
  std::vector<double> predict(const Eigen::MatrixXd& covariates) const;
};

struct LinearQuantileOptions {
  std::size_t max_iterations = 2000;  // per smoothing level
  double final_epsilon = 1e-6;        // relative to the response scale
  double tolerance = 1e-12;
};

// Raised when the iteration budget runs out; carries the best iterate.
class QuantileFitError : public Error {
 public:
  QuantileFitError(const std::string& message, LinearQuantileModel best)
      : Error(ErrorCode::kNumericalFailure, message), best_(std::move(best)) {}
  const LinearQuantileModel& best() const { return best_; }

 private:
  LinearQuantileModel best_;
};

// Summed pinball loss of the affine function (intercept, coefficients).
double linear_quantile_objective(const Dataset& data, double alpha, double intercept,
                                 const Eigen::VectorXd& coefficients);

// Majorize-minimize iteratively reweighted least squares on an
// epsilon-smoothed pinball loss with annealed epsilon, finished by basis
// exchange to an interpolating vertex that passes the subgradient check.
LinearQuantileModel fit_linear_quantile(const Dataset& data, double alpha,
                                        const LinearQuantileOptions& options = {});

struct QuantileBoostSelection {
  QuantileBoostModel model;
  SelectionReport report;
};

// Chooses the number of stages by plain minimum cross-validated pinball loss.
QuantileBoostSelection select_quantile_gbm(const Dataset& data, double alpha,
                                           const BoostParams& params, std::size_t folds = 5,
                                           std::uint64_t cv_seed = 0);

// Leaf co-occurrence weights of a quantile regression forest:
//   w_i = (1/T) sum_t I(i in leaf_t(x)) / |leaf_t(x)|
// where leaf membership counts every training point routed through tree t.
std::vector<double> qrf_weights(const ForestModel& forest,
                                const Eigen::Ref<const Eigen::RowVectorXd>& query);

// Quantile curves from QRF weights, inverted exactly as the kernel estimator.
class QrfEstimator {
 public:
  explicit QrfEstimator(const ForestModel& forest);

  std::vector<double> weights(const Eigen::Ref<const Eigen::RowVectorXd>& query) const {
    return qrf_weights(forest_, query);
  }
  QuantileCurve quantile_curve(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                               std::span<const double> alphas) const;

 private:
  const ForestModel& forest_;
  ResponseKnots knots_;
};

}  // namespace condquant
