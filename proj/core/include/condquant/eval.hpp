#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "condquant/boost.hpp"
#include "condquant/dataset.hpp"
#include "condquant/forest.hpp"
#include "condquant/kernels.hpp"
#include "condquant/selection.hpp"

namespace condquant {

// Mean test pinball loss:
//   (1/n) [ (1 - alpha) sum_{y < q} (q - y) + alpha sum_{y >= q} (y - q) ]
double pinball_error(std::span<const double> y_test, std::span<const double> q_test, double alpha);

// Residual-scale estimate: the smallest finite test RMSE among the base models.
double residual_scale_estimate(std::span<const double> test_rmses);

// Fraction of points with lower_i <= y_i <= upper_i. A crossed band
// (lower_i > upper_i) is a contract violation.
double coverage(std::span<const double> y_test, std::span<const double> lower,
                std::span<const double> upper);

// Optional dataset exclusions mirroring the benchmark protocol.
struct GuardConfig {
  bool enabled = false;
  std::size_t min_rows = 500;
  std::size_t max_rows = 10000;
  std::size_t min_distinct_responses = 25;
};

// Reason for rejection, or nullopt when the dataset passes (or guards are off).
std::optional<std::string> check_guards(const Dataset& data, const GuardConfig& guards);

enum class Method { kKernelLM, kKernelGB, kKernelRF, kDirectLM, kDirectGB, kDirectRF };

// Case-sensitive: qLM/qGB/qRF are kernel-smoothed mean models, QLM/QGB/QRF
// are the direct quantile estimators.
Method parse_method(std::string_view text);
std::string to_string(Method method);
bool is_kernel_method(Method method);
const std::vector<Method>& all_methods();

const std::vector<double>& default_alphas();

// Shared fitting settings for the mean models and the quantile estimators.
struct ModelSettings {
  KernelSpec kernel = KernelSpec::gaussian();
  BandwidthRule bandwidth = BandwidthRule::silverman();
  ForestParams forest;
  BoostParams boost;
  std::size_t ridge_grid_size = 20;
  std::size_t folds = 5;
};

// Selected mean models keyed by what the requested methods need. Seeds:
// ridge CV derive(seed, 1), boosting derive(seed, 2) with CV derive(seed, 3),
// forest derive(seed, 4). With `fallback_ridge` the ridge model is fitted
// even when no method needs it.
struct BaseModels {
  std::optional<MeanModel> lm;
  std::optional<MeanModel> gb;
  std::optional<MeanModel> rf;
  std::map<std::string, SelectionReport> selections;
};

BaseModels fit_base_models(const Dataset& train, std::span<const Method> methods,
                           const ModelSettings& settings, std::uint64_t seed,
                           bool fallback_ridge = false);

// Requested levels together with their complements, ascending, de-duplicated.
std::vector<double> evaluation_levels(std::span<const double> alphas);

// Position of `alpha` in `levels` (tolerance 1e-9); contract violation if absent.
std::size_t level_index(std::span<const double> levels, double alpha);

struct QuantilePredictions {
  Method method = Method::kKernelRF;
  std::vector<double> levels;
  Eigen::MatrixXd values;  // queries x levels
  std::size_t fallback_queries = 0;
  std::size_t substituted_fitted = 0;  // forest points without an OOB prediction
  std::map<std::string, SelectionReport> selections;  // direct boosting, per level
  std::vector<std::string> warnings;
};

// Quantile estimates of one method at every query row and level. Kernel
// methods and QRF reuse `base`; QLM and QGB are fitted per level, QGB with
// model seed derive(seed, 5, k) and CV seed derive(seed, 6).
QuantilePredictions predict_quantiles(Method method, const BaseModels& base, const Dataset& train,
                                      const Eigen::MatrixXd& queries,
                                      std::span<const double> levels,
                                      const ModelSettings& settings, std::uint64_t seed);

// Queries whose quantile row decreases somewhere along the levels.
std::vector<std::size_t> crossing_queries(const Eigen::MatrixXd& values);

struct AlphaResult {
  double alpha = 0.0;
  double error = 0.0;          // E_alpha
  double partner_error = 0.0;  // E_{1 - alpha}
  double combined = 0.0;       // 0.5 E_alpha + 0.5 E_{1 - alpha}
  double scaled_error = 0.0;
  double scaled_combined = 0.0;
  double target_coverage = 0.0;  // 1 - 2 min(alpha, 1 - alpha); NaN at 0.5
  double coverage = 0.0;         // NaN at alpha = 0.5
};

struct EvalReport {
  std::string method;
  std::string dataset;
  std::size_t split = 0;
  std::uint64_t seed = 0;
  std::size_t n_test = 0;
  double sigma_hat = 0.0;
  std::vector<AlphaResult> per_alpha;
  std::size_t crossing_queries = 0;  // queries whose quantile curve decreases somewhere
  std::size_t crossed_intervals = 0;
  std::size_t fallback_queries = 0;
};

struct BenchmarkConfig {
  std::string dataset_label = "data";
  std::vector<Method> methods = all_methods();
  std::size_t n_splits = 10;
  double train_fraction = 0.7;
  std::size_t train_size = 0;  // overrides train_fraction when positive
  std::vector<double> alphas = default_alphas();
  std::uint64_t seed = 0;
  ModelSettings models;
  GuardConfig guards;
};

nlohmann::json to_json(const BenchmarkConfig& config);

struct SplitSummary {
  std::size_t split = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double sigma_hat = 0.0;
  std::map<std::string, double> base_test_rmse;
  std::map<std::string, SelectionReport> selections;
  std::vector<std::string> warnings;
};

struct BenchmarkResult {
  std::string dataset;
  bool skipped = false;
  std::string skip_reason;
  BenchmarkConfig config;
  std::vector<SplitSummary> splits;
  std::vector<EvalReport> reports;
};

// Repeated random train/test splits; on each split the mean models are
// selected, the kernel estimators are built on training fitted values (OOB
// for the forest), the direct baselines are fitted, and every method is
// scored on the held-out rows. A guard violation yields a skipped result.
BenchmarkResult run_benchmark(const Dataset& data, const BenchmarkConfig& config);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const BenchmarkResult& result);

// One row per method x alpha x split.
void write_report_csv(std::ostream& out, const BenchmarkResult& result);
// Per method and tail level: split-averaged scaled combined error and coverage.
void write_boxplot_csv(std::ostream& out, const BenchmarkResult& result);
// Kernel vs direct method pairs per tail level and side.
void write_pairwise_csv(std::ostream& out, const BenchmarkResult& result);

// report.json, report.csv, plot_boxplot.csv, plot_pairwise.csv
void write_benchmark_outputs(const BenchmarkResult& result, const std::filesystem::path& dir);

}  // namespace condquant
