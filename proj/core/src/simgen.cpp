#include "condquant/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "condquant/error.hpp"
#include "condquant/random.hpp"

namespace condquant {
namespace {

bool uses_linear_term(ScenarioId id) { return id == ScenarioId::kIII || id == ScenarioId::kIV; }

double sign_plus(double v) { return v >= 0.0 ? 1.0 : -1.0; }

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i,
                                 std::array<double, kScenarioDimension>& buffer) {
  for (std::size_t j = 0; j < kScenarioDimension; ++j) buffer[j] = m(i, static_cast<Eigen::Index>(j));
  return buffer;
}

}  // namespace

ScenarioId parse_scenario(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "i" || lower == "1") return ScenarioId::kI;
  if (lower == "ii" || lower == "2") return ScenarioId::kII;
  if (lower == "iii" || lower == "3") return ScenarioId::kIII;
  if (lower == "iv" || lower == "4") return ScenarioId::kIV;
  if (lower == "v" || lower == "5") return ScenarioId::kV;
  raise(ErrorCode::kInvalidInput, "unknown scenario '" + std::string(text) + "' (expected i..v)");
}

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kI: return "i";
    case ScenarioId::kII: return "ii";
    case ScenarioId::kIII: return "iii";
    case ScenarioId::kIV: return "iv";
    case ScenarioId::kV: return "v";
  }
  return "?";
}

std::array<double, kScenarioDimension> ridge_direction(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  std::array<double, kScenarioDimension> w{};
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : w) {
      v = normal(rng);
      norm += v * v;
    }
  } while (!(norm > 0.0));
  norm = std::sqrt(norm);
  for (double& v : w) v /= norm;
  return w;
}

ScenarioSpec make_scenario(ScenarioId id, std::uint64_t direction_seed) {
  return {id, ridge_direction(direction_seed), direction_seed};
}

double base_curve(double t) { return std::cos(2.5 * t) + 0.2 * t * t; }

double projection(const ScenarioSpec& spec, std::span<const double> x) {
  require(x.size() == kScenarioDimension, ErrorCode::kInvalidInput,
          "scenario covariate vectors have 5 components");
  double t = 0.0;
  for (std::size_t j = 0; j < kScenarioDimension; ++j) t += x[j] * spec.direction[j];
  return t;
}

double mean_function(const ScenarioSpec& spec, std::span<const double> x) {
  const double t = projection(spec, x);
  return uses_linear_term(spec.id) ? base_curve(t) + 1.25 * t : base_curve(t);
}

double residual_scale(const ScenarioSpec& spec, std::span<const double> x) {
  const double t = projection(spec, x);
  switch (spec.id) {
    case ScenarioId::kI:
    case ScenarioId::kIII:
      return 3.0 * sign_plus(t) / (1.0 + std::abs(t));
    case ScenarioId::kII:
    case ScenarioId::kIV:
      return 3.0 / (0.5 + t * t);
    case ScenarioId::kV: {
      const double mu = mean_function(spec, x);
      return 6.0 * sign_plus(mu) / (1.0 + std::abs(mu));
    }
  }
  return 1.0;
}

double true_quantile(const ScenarioSpec& spec, std::span<const double> x, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  const double a = residual_scale(spec, x);
  // (E - 1)/a is increasing in E for a > 0 and decreasing for a < 0.
  const double level = a > 0.0 ? alpha : 1.0 - alpha;
  const double exp_quantile = -std::log1p(-level);
  return mean_function(spec, x) + (exp_quantile - 1.0) / a;
}

Eigen::MatrixXd sample_covariates(std::size_t n, std::uint64_t covariate_seed) {
  Rng rng = make_rng(covariate_seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kScenarioDimension));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng);
  }
  return x;
}

std::vector<double> sample_responses(const ScenarioSpec& spec, const Eigen::MatrixXd& covariates,
                                     std::uint64_t response_seed) {
  require(covariates.cols() == static_cast<Eigen::Index>(kScenarioDimension),
          ErrorCode::kInvalidInput, "scenario covariates have 5 columns");
  Rng rng = make_rng(response_seed);
  std::exponential_distribution<double> exponential(1.0);
  std::vector<double> y(static_cast<std::size_t>(covariates.rows()));
  std::array<double, kScenarioDimension> buffer{};
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    const auto x = row_span(covariates, i, buffer);
    const double e = exponential(rng);
    y[static_cast<std::size_t>(i)] = mean_function(spec, x) + (e - 1.0) / residual_scale(spec, x);
  }
  return y;
}

Dataset sample_scenario(const ScenarioSpec& spec, std::size_t n, std::uint64_t covariate_seed,
                        std::uint64_t response_seed) {
  require(n >= 1, ErrorCode::kInvalidInput, "scenario sample size must be positive");
  Dataset data;
  data.covariates = sample_covariates(n, covariate_seed);
  data.responses = sample_responses(spec, data.covariates, response_seed);
  data.feature_names = {"x1", "x2", "x3", "x4", "x5"};
  return data;
}

Dataset sample_scenario(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed) {
  return sample_scenario(spec, n, derive_seed(seed, 0), derive_seed(seed, 1));
}

}  // namespace condquant
