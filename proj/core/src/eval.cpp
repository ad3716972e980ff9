#include "condquant/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "condquant/error.hpp"

namespace condquant {

double pinball_error(std::span<const double> y_test, std::span<const double> q_test,
                     double alpha) {
  require(y_test.size() == q_test.size(), ErrorCode::kInvalidInput,
          "responses and quantile estimates differ in length");
  require(!y_test.empty(), ErrorCode::kInvalidInput, "pinball error of an empty test set");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  double below = 0.0;  // sum over y < q of (q - y)
  double above = 0.0;  // sum over y >= q of (y - q)
  for (std::size_t i = 0; i < y_test.size(); ++i) {
    if (y_test[i] < q_test[i]) {
      below += q_test[i] - y_test[i];
    } else {
      above += y_test[i] - q_test[i];
    }
  }
  return ((1.0 - alpha) * below + alpha * above) / static_cast<double>(y_test.size());
}

double residual_scale_estimate(std::span<const double> test_rmses) {
  require(!test_rmses.empty(), ErrorCode::kInvalidInput, "no base-model RMSE supplied");
  double best = std::numeric_limits<double>::infinity();
  for (double r : test_rmses) {
    if (std::isfinite(r)) best = std::min(best, r);
  }
  require(std::isfinite(best), ErrorCode::kInvalidInput, "every base-model RMSE is non-finite");
  return best;
}

double coverage(std::span<const double> y_test, std::span<const double> lower,
                std::span<const double> upper) {
  require(y_test.size() == lower.size() && y_test.size() == upper.size(),
          ErrorCode::kInvalidInput, "coverage inputs differ in length");
  require(!y_test.empty(), ErrorCode::kInvalidInput, "coverage of an empty test set");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < y_test.size(); ++i) {
    if (lower[i] > upper[i]) {
      raise(ErrorCode::kContractViolation,
            "crossed prediction interval at index " + std::to_string(i));
    }
    if (lower[i] <= y_test[i] && y_test[i] <= upper[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(y_test.size());
}

std::optional<std::string> check_guards(const Dataset& data, const GuardConfig& guards) {
  if (!guards.enabled) return std::nullopt;
  if (data.rows() > guards.max_rows) {
    return "more than " + std::to_string(guards.max_rows) + " observations";
  }
  if (data.rows() < guards.min_rows) {
    return "fewer than " + std::to_string(guards.min_rows) + " observations";
  }
  const std::set<double> distinct(data.responses.begin(), data.responses.end());
  if (distinct.size() < guards.min_distinct_responses) {
    return "fewer than " + std::to_string(guards.min_distinct_responses) +
           " distinct response values";
  }
  return std::nullopt;
}

Method parse_method(std::string_view text) {
  if (text == "qLM") return Method::kKernelLM;
  if (text == "qGB") return Method::kKernelGB;
  if (text == "qRF") return Method::kKernelRF;
  if (text == "QLM") return Method::kDirectLM;
  if (text == "QGB") return Method::kDirectGB;
  if (text == "QRF") return Method::kDirectRF;
  raise(ErrorCode::kInvalidInput,
        "unknown method '" + std::string(text) + "' (expected qLM, qGB, qRF, QLM, QGB or QRF)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kKernelLM: return "qLM";
    case Method::kKernelGB: return "qGB";
    case Method::kKernelRF: return "qRF";
    case Method::kDirectLM: return "QLM";
    case Method::kDirectGB: return "QGB";
    case Method::kDirectRF: return "QRF";
  }
  return "?";
}

bool is_kernel_method(Method method) {
  return method == Method::kKernelLM || method == Method::kKernelGB ||
         method == Method::kKernelRF;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::kKernelLM, Method::kKernelGB,
                                              Method::kKernelRF, Method::kDirectLM,
                                              Method::kDirectGB, Method::kDirectRF};
  return methods;
}

const std::vector<double>& default_alphas() {
  static const std::vector<double> alphas = {0.005, 0.025, 0.05, 0.25, 0.5,
                                             0.75,  0.95,  0.975, 0.995};
  return alphas;
}

}  // namespace condquant
