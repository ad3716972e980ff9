#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "condquant/dataset.hpp"

namespace condquant {

// Five ridge-function designs built on g(t) = cos(2.5 t) + 0.2 t^2 with
// exponential residuals: y = mu(x) + (E - 1) / a(x), E ~ Exp(1).
//
//   i    mu = g(x'w)             a = 3 sign(x'w) / (1 + |x'w|)
//   ii   mu = g(x'w)             a = 3 / (0.5 + (x'w)^2)
//   iii  mu = g(x'w) + 1.25 x'w  a as in i
//   iv   mu = g(x'w) + 1.25 x'w  a as in ii
//   v    mu = g(x'w)             a = 6 sign(mu) / (1 + |mu|)
enum class ScenarioId { kI = 1, kII = 2, kIII = 3, kIV = 4, kV = 5 };

inline constexpr std::size_t kScenarioDimension = 5;

struct ScenarioSpec {
  ScenarioId id = ScenarioId::kI;
  std::array<double, kScenarioDimension> direction{};
  std::uint64_t seed = 0;  // seed the direction was drawn from
};

// Accepts roman ("i".."v", any case) or arabic ("1".."5") labels.
ScenarioId parse_scenario(std::string_view text);
std::string to_string(ScenarioId id);

// Five standard-normal draws normalized to unit length.
std::array<double, kScenarioDimension> ridge_direction(std::uint64_t seed);

ScenarioSpec make_scenario(ScenarioId id, std::uint64_t direction_seed);

double base_curve(double t);
double projection(const ScenarioSpec& spec, std::span<const double> x);
double mean_function(const ScenarioSpec& spec, std::span<const double> x);
// sign(0) is taken as +1.
double residual_scale(const ScenarioSpec& spec, std::span<const double> x);
double true_quantile(const ScenarioSpec& spec, std::span<const double> x, double alpha);

// i.i.d. standard-normal covariates in R^5.
Eigen::MatrixXd sample_covariates(std::size_t n, std::uint64_t covariate_seed);

// Fresh responses for fixed covariates.
std::vector<double> sample_responses(const ScenarioSpec& spec, const Eigen::MatrixXd& covariates,
                                     std::uint64_t response_seed);

Dataset sample_scenario(const ScenarioSpec& spec, std::size_t n, std::uint64_t covariate_seed,
                        std::uint64_t response_seed);

// Single-seed convenience: covariate and response seeds are derived from `seed`.
Dataset sample_scenario(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace condquant
