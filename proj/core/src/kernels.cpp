#include "condquant/kernels.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "condquant/error.hpp"

namespace condquant {
namespace {

constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

using Row = std::array<double, KernelSpec::kMaxOrder + 1>;

// Polynomial coefficients beta_k = 1 / (k! * 2 (r + 1)).
Row poly_coefficients(int order) {
  Row beta{};
  double factorial = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) factorial *= k;
    beta[k] = 1.0 / (factorial * 2.0 * (order + 1));
  }
  return beta;
}

using BinomialTable = std::array<Row, KernelSpec::kMaxOrder + 1>;

BinomialTable binomials() {
  BinomialTable c{};
  for (int n = 0; n <= KernelSpec::kMaxOrder; ++n) {
    c[n][0] = 1.0;
    for (int k = 1; k <= n; ++k) c[n][k] = c[n - 1][k - 1] + (k < n ? c[n - 1][k] : 0.0);
  }
  return c;
}

// Shifts the moment vector `moments` (defined relative to one anchor) by a
// non-negative displacement d, applying the exp(-d) decay:
//   out_l = exp(-d) * sum_m C(l, m) d^(l-m) moments_m
void shift_moments(const Row& moments, double d, int order, const BinomialTable& binom,
                   Row& out) {
  std::array<double, KernelSpec::kMaxOrder + 1> powers{};
  powers[0] = 1.0;
  for (int k = 1; k <= order; ++k) powers[k] = powers[k - 1] * d;
  const double decay = std::exp(-d);
  for (int l = 0; l <= order; ++l) {
    double acc = 0.0;
    for (int m = 0; m <= l; ++m) acc += binom[l][m] * powers[l - m] * moments[m];
    out[l] = decay * acc;
  }
}

// Evaluates sum_k beta_k sum_l C(k, l) a^(k-l) moments_l * exp(-a).
double close_moments(const Row& moments, double a, int order, const Row& beta,
                     const BinomialTable& binom) {
  Row shifted{};
  shift_moments(moments, a, order, binom, shifted);
  double total = 0.0;
  for (int k = 0; k <= order; ++k) total += beta[k] * shifted[k];
  return total;
}

std::vector<double> poly_exponential_sums(int order, std::span<const double> points,
                                          std::span<const double> coefficients,
                                          std::span<const double> queries, double h) {
  const std::size_t n = points.size();
  const Row beta = poly_coefficients(order);
  const BinomialTable binom = binomials();

  // left[i]_l  = sum_{j <= i} c_j ((x_i - x_j)/h)^l exp(-(x_i - x_j)/h)
  // right[i]_l = sum_{j >= i} c_j ((x_j - x_i)/h)^l exp(-(x_j - x_i)/h)
  std::vector<Row> left(n), right(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      left[i] = Row{};
    } else {
      shift_moments(left[i - 1], (points[i] - points[i - 1]) / h, order, binom, left[i]);
    }
    left[i][0] += coefficients[i];
  }
  for (std::size_t r = n; r-- > 0;) {
    if (r + 1 == n) {
      right[r] = Row{};
    } else {
      shift_moments(right[r + 1], (points[r + 1] - points[r]) / h, order, binom, right[r]);
    }
    right[r][0] += coefficients[r];
  }

  std::vector<double> out(queries.size(), 0.0);
  for (std::size_t j = 0; j < queries.size(); ++j) {
    const double y = queries[j];
    const std::size_t split =
        static_cast<std::size_t>(std::upper_bound(points.begin(), points.end(), y) - points.begin());
    double total = 0.0;
    if (split > 0) {
      total += close_moments(left[split - 1], (y - points[split - 1]) / h, order, beta, binom);
    }
    if (split < n) {
      total += close_moments(right[split], (points[split] - y) / h, order, beta, binom);
    }
    out[j] = total;
  }
  return out;
}

}  // namespace

KernelSpec KernelSpec::poly_exponential(int order) {
  require(order >= 0 && order <= kMaxOrder, ErrorCode::kInvalidInput,
          "poly-exponential kernel order must lie in [0, " + std::to_string(kMaxOrder) + "]");
  return {KernelFamily::kPolyExponential, order};
}

KernelSpec parse_kernel(std::string_view text) {
  if (text == "gaussian") return KernelSpec::gaussian();
  constexpr std::string_view kPrefix = "polyexp";
  if (text.substr(0, kPrefix.size()) == kPrefix) {
    std::string_view rest = text.substr(kPrefix.size());
    if (rest.empty()) return KernelSpec::poly_exponential(1);
    if (rest.front() == ':') {
      rest.remove_prefix(1);
      int order = -1;
      auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), order);
      if (ec == std::errc() && ptr == rest.data() + rest.size()) {
        return KernelSpec::poly_exponential(order);
      }
    }
  }
  raise(ErrorCode::kInvalidInput, "unknown kernel '" + std::string(text) +
                                      "' (expected gaussian, polyexp or polyexp:<order>)");
}

std::string to_string(const KernelSpec& kernel) {
  if (kernel.family == KernelFamily::kGaussian) return "gaussian";
  return "polyexp:" + std::to_string(kernel.order);
}

double kernel_eval(const KernelSpec& kernel, double u) {
  require(std::isfinite(u), ErrorCode::kInvalidInput, "kernel argument must be finite");
  if (kernel.family == KernelFamily::kGaussian) {
    return kInvSqrt2Pi * std::exp(-0.5 * u * u);
  }
  const double t = std::abs(u);
  double term = 1.0;
  double poly = 1.0;
  for (int k = 1; k <= kernel.order; ++k) {
    term *= t / k;
    poly += term;
  }
  return poly * std::exp(-t) / (2.0 * (kernel.order + 1));
}

BandwidthRule BandwidthRule::fixed(double h) {
  require(std::isfinite(h) && h > 0.0, ErrorCode::kInvalidInput,
          "fixed bandwidth must be positive and finite");
  return {Kind::kFixed, h};
}

BandwidthRule parse_bandwidth(std::string_view text) {
  if (text == "silverman") return BandwidthRule::silverman();
  double h = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), h);
  require(ec == std::errc() && ptr == text.data() + text.size(), ErrorCode::kInvalidInput,
          "bandwidth must be 'silverman' or a positive number, got '" + std::string(text) + "'");
  return BandwidthRule::fixed(h);
}

std::string to_string(const BandwidthRule& rule) {
  if (rule.kind == BandwidthRule::Kind::kSilverman) return "silverman";
  std::ostringstream os;
  os.precision(17);
  os << rule.fixed_value;
  return os.str();
}

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  require(n >= 2, ErrorCode::kInvalidInput, "Silverman bandwidth needs at least two values");
  double mean = 0.0;
  for (double v : values) {
    require(std::isfinite(v), ErrorCode::kInvalidInput, "Silverman bandwidth input is not finite");
    mean += v;
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Type-7 (linear interpolation) sample quantiles.
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);

  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) {
    raise(ErrorCode::kDegenerateSample,
          "all values are identical; supply a fixed bandwidth instead of Silverman's rule");
  }
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double resolve_bandwidth(const BandwidthRule& rule, std::span<const double> values) {
  if (rule.kind == BandwidthRule::Kind::kFixed) return rule.fixed_value;
  return silverman_bandwidth(values);
}

std::vector<double> weighted_kernel_sums(const KernelSpec& kernel,
                                         std::span<const double> sample_points,
                                         std::span<const double> coefficients,
                                         std::span<const double> query_points, double h) {
  require(std::isfinite(h) && h > 0.0, ErrorCode::kInvalidInput, "bandwidth must be positive");
  require(sample_points.size() == coefficients.size(), ErrorCode::kInvalidInput,
          "sample_points and coefficients differ in length");
  for (std::size_t i = 0; i < sample_points.size(); ++i) {
    require(std::isfinite(sample_points[i]), ErrorCode::kInvalidInput,
            "sample point " + std::to_string(i) + " is not finite");
    if (i > 0 && sample_points[i] < sample_points[i - 1]) {
      raise(ErrorCode::kContractViolation,
            "sample_points must be sorted ascending (violated at index " + std::to_string(i) +
                ")");
    }
  }
  for (double q : query_points) {
    require(std::isfinite(q), ErrorCode::kInvalidInput, "query point is not finite");
  }
  if (sample_points.empty()) return std::vector<double>(query_points.size(), 0.0);

  if (kernel.family == KernelFamily::kPolyExponential) {
    return poly_exponential_sums(kernel.order, sample_points, coefficients, query_points, h);
  }

  std::vector<double> out(query_points.size(), 0.0);
  const double inv_h = 1.0 / h;
  for (std::size_t j = 0; j < query_points.size(); ++j) {
    const double q = query_points[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < sample_points.size(); ++i) {
      const double u = (sample_points[i] - q) * inv_h;
      acc += coefficients[i] * std::exp(-0.5 * u * u);
    }
    out[j] = kInvSqrt2Pi * acc;
  }
  return out;
}

}  // namespace condquant
