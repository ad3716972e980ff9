#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condquant {

enum class KernelFamily { kGaussian, kPolyExponential };

// Symmetric, strictly positive kernels with unbounded support.
//
// Gaussian:          K(u) = exp(-u^2 / 2) / sqrt(2 pi)
// Poly-exponential:  K(u) = exp(-|u|) * sum_{k=0..r} |u|^k / k!  /  (2 (r + 1))
//
// The poly-exponential family with order r is the Erlang(r+1) survival
// function scaled to unit mass; it is non-increasing in |u| for every r, and
// its exponential factor admits exact O(n + m) recursive summation over sorted
// sample points.
struct KernelSpec {
  static constexpr int kMaxOrder = 8;

  KernelFamily family = KernelFamily::kGaussian;
  int order = 0;  // poly-exponential only

  static KernelSpec gaussian() { return {KernelFamily::kGaussian, 0}; }
  static KernelSpec poly_exponential(int order);

  bool operator==(const KernelSpec&) const = default;
};

// "gaussian", "polyexp" (order 1), or "polyexp:<order>".
KernelSpec parse_kernel(std::string_view text);
std::string to_string(const KernelSpec& kernel);

double kernel_eval(const KernelSpec& kernel, double u);

struct BandwidthRule {
  enum class Kind { kSilverman, kFixed };

  Kind kind = Kind::kSilverman;
  double fixed_value = 0.0;

  static BandwidthRule silverman() { return {Kind::kSilverman, 0.0}; }
  static BandwidthRule fixed(double h);
};

// "silverman" or a positive number.
BandwidthRule parse_bandwidth(std::string_view text);
std::string to_string(const BandwidthRule& rule);

// 0.9 * min(sd, IQR / 1.34) * n^(-1/5), with the IQR term dropped when it is
// zero. Throws kDegenerateSample when every value is identical.
double silverman_bandwidth(std::span<const double> values);

double resolve_bandwidth(const BandwidthRule& rule, std::span<const double> values);

// out[j] = sum_i coefficients[i] * K((sample_points[i] - query_points[j]) / h)
//
// sample_points must be sorted ascending. Poly-exponential kernels use the
// exact sorted recursion; the Gaussian kernel is summed directly.
std::vector<double> weighted_kernel_sums(const KernelSpec& kernel,
                                         std::span<const double> sample_points,
                                         std::span<const double> coefficients,
                                         std::span<const double> query_points,
                                         double h);

}  // namespace condquant
