#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>

#include "condquant/baselines.hpp"
#include "condquant/cdist.hpp"
#include "condquant/csv.hpp"
#include "condquant/error.hpp"
#include "condquant/eval.hpp"
#include "condquant/random.hpp"

namespace condquant {
namespace {

constexpr double kLevelTolerance = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_level(double a, double b) { return std::abs(a - b) <= kLevelTolerance; }

bool wants(std::span<const Method> methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

Eigen::MatrixXd quantile_matrix(const Eigen::MatrixXd& queries, std::size_t levels) {
  return Eigen::MatrixXd(queries.rows(), static_cast<Eigen::Index>(levels));
}

void kernel_quantiles(QuantilePredictions& out, const MeanModel& model, const Dataset& train,
                      const Eigen::MatrixXd& queries, const ModelSettings& settings) {
  const FittedValues fitted = training_fitted_values(model, train);
  out.substituted_fitted = fitted.substituted;
  if (fitted.substituted > 0) {
    out.warnings.push_back(to_string(out.method) + ": " + std::to_string(fitted.substituted) +
                           " training points lacked an OOB prediction; full-forest "
                           "predictions substituted");
  }
  const ConditionalDistributionModel cdist = ConditionalDistributionModel::fit(
      fitted.values, train.responses, settings.kernel, settings.bandwidth);
  const std::vector<double> query = predict(model, queries);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const QuantileCurve curve = cdist.quantile_curve(query[i], out.levels);
    out.fallback_queries += curve.fallback ? 1 : 0;
    for (std::size_t k = 0; k < out.levels.size(); ++k) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = curve.values[k];
    }
  }
}

const MeanModel& need(const std::optional<MeanModel>& model, Method method) {
  require(model.has_value(), ErrorCode::kContractViolation,
          "base model for " + to_string(method) + " was not fitted");
  return *model;
}

}  // namespace

std::vector<double> evaluation_levels(std::span<const double> alphas) {
  std::vector<double> levels;
  for (double a : alphas) {
    levels.push_back(a);
    levels.push_back(1.0 - a);
  }
  std::sort(levels.begin(), levels.end());
  std::vector<double> unique;
  for (double a : levels) {
    if (unique.empty() || !same_level(unique.back(), a)) unique.push_back(a);
  }
  return unique;
}

std::size_t level_index(std::span<const double> levels, double alpha) {
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (same_level(levels[k], alpha)) return k;
  }
  raise(ErrorCode::kContractViolation, "quantile level missing from evaluation grid");
}

std::vector<std::size_t> crossing_queries(const Eigen::MatrixXd& values) {
  std::vector<std::size_t> crossing;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 1; k < values.cols(); ++k) {
      if (values(i, k) < values(i, k - 1)) {
        crossing.push_back(static_cast<std::size_t>(i));
        break;
      }
    }
  }
  return crossing;
}

BaseModels fit_base_models(const Dataset& train, std::span<const Method> methods,
                           const ModelSettings& settings, std::uint64_t seed,
                           bool fallback_ridge) {
  const bool need_gb = wants(methods, Method::kKernelGB);
  const bool need_rf = wants(methods, Method::kKernelRF) || wants(methods, Method::kDirectRF);
  const bool need_lm = wants(methods, Method::kKernelLM) || (fallback_ridge && !need_gb && !need_rf);
  BaseModels base;
  if (need_lm) {
    RidgeSelection sel = select_ridge(train, settings.ridge_grid_size, settings.folds, derive_seed(seed, 1));
    base.selections["LM"] = std::move(sel.report);
    base.lm = std::move(sel.model);
  }
  if (need_gb) {
    BoostParams params = settings.boost;
    params.seed = derive_seed(seed, 2);
    BoostSelection sel = select_gbm(train, params, settings.folds, derive_seed(seed, 3));
    base.selections["GB"] = std::move(sel.report);
    base.gb = std::move(sel.model);
  }
  if (need_rf) {
    ForestParams params = settings.forest;
    params.seed = derive_seed(seed, 4);
    params.record_membership = wants(methods, Method::kDirectRF);
    ForestSelection sel = select_forest(train, params);
    base.selections["RF"] = std::move(sel.report);
    base.rf = std::move(sel.model);
  }
  return base;
}

QuantilePredictions predict_quantiles(Method method, const BaseModels& base, const Dataset& train,
                                      const Eigen::MatrixXd& queries,
                                      std::span<const double> levels,
                                      const ModelSettings& settings, std::uint64_t seed) {
  require(queries.cols() == static_cast<Eigen::Index>(train.cols()), ErrorCode::kInvalidInput,
          "query covariates do not match the training columns");
  QuantilePredictions out;
  out.method = method;
  out.levels.assign(levels.begin(), levels.end());
  out.values = quantile_matrix(queries, levels.size());
  switch (method) {
    case Method::kKernelLM:
      kernel_quantiles(out, need(base.lm, method), train, queries, settings);
      break;
    case Method::kKernelGB:
      kernel_quantiles(out, need(base.gb, method), train, queries, settings);
      break;
    case Method::kKernelRF:
      kernel_quantiles(out, need(base.rf, method), train, queries, settings);
      break;
    case Method::kDirectLM:
      for (std::size_t k = 0; k < levels.size(); ++k) {
        LinearQuantileModel model;
        try {
          model = fit_linear_quantile(train, levels[k]);
        } catch (const QuantileFitError& e) {
          out.warnings.push_back("QLM alpha=" + format_double(levels[k]) + ": " + e.what());
          model = e.best();
        }
        const std::vector<double> q = model.predict(queries);
        for (std::size_t i = 0; i < q.size(); ++i) {
          out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = q[i];
        }
      }
      break;
    case Method::kDirectGB:
      for (std::size_t k = 0; k < levels.size(); ++k) {
        BoostParams params = settings.boost;
        params.seed = derive_seed(seed, 5, k);
        QuantileBoostSelection sel =
            select_quantile_gbm(train, levels[k], params, settings.folds, derive_seed(seed, 6));
        const std::vector<double> q = sel.model.predict(queries);
        for (std::size_t i = 0; i < q.size(); ++i) {
          out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = q[i];
        }
        out.selections["QGB alpha=" + format_double(levels[k])] = std::move(sel.report);
      }
      break;
    case Method::kDirectRF: {
      const QrfEstimator qrf(std::get<ForestModel>(need(base.rf, method)));
      for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const QuantileCurve curve = qrf.quantile_curve(queries.row(i), levels);
        for (std::size_t k = 0; k < levels.size(); ++k) {
          out.values(i, static_cast<Eigen::Index>(k)) = curve.values[k];
        }
      }
      break;
    }
  }
  return out;
}

namespace {

EvalReport score(const QuantilePredictions& mq, const Dataset& test, std::span<const double> levels,
                 const BenchmarkConfig& config, const SplitSummary& summary) {
  EvalReport report;
  report.method = to_string(mq.method);
  report.dataset = config.dataset_label;
  report.split = summary.split;
  report.seed = summary.seed;
  report.n_test = test.rows();
  report.sigma_hat = summary.sigma_hat;
  report.fallback_queries = mq.fallback_queries;

  const Eigen::MatrixXd& q = mq.values;
  const Eigen::Index n = q.rows();
  report.crossing_queries = crossing_queries(q).size();
  auto column = [&](std::size_t k) {
    std::vector<double> c(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = q(i, static_cast<Eigen::Index>(k));
    return c;
  };
  for (std::size_t k = 0; k < levels.size() && levels[k] < 0.5 - kLevelTolerance; ++k) {
    const std::size_t upper = level_index(levels, 1.0 - levels[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q(i, static_cast<Eigen::Index>(k)) > q(i, static_cast<Eigen::Index>(upper))) {
        ++report.crossed_intervals;
      }
    }
  }

  for (double alpha : config.alphas) {
    const std::size_t k = level_index(levels, alpha);
    const std::size_t partner = level_index(levels, 1.0 - alpha);
    AlphaResult r;
    r.alpha = alpha;
    r.error = pinball_error(test.responses, column(k), alpha);
    r.partner_error = pinball_error(test.responses, column(partner), 1.0 - alpha);
    r.combined = 0.5 * r.error + 0.5 * r.partner_error;
    r.scaled_error = r.error / summary.sigma_hat;
    r.scaled_combined = r.combined / summary.sigma_hat;
    if (same_level(alpha, 0.5)) {
      r.target_coverage = kNaN;
      r.coverage = kNaN;
    } else {
      const double tail = std::min(alpha, 1.0 - alpha);
      const std::size_t lo = level_index(levels, tail);
      const std::size_t hi = level_index(levels, 1.0 - tail);
      std::size_t inside = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double y = test.responses[static_cast<std::size_t>(i)];
        // Indicator q_lo <= y <= q_hi; a crossed band covers nothing.
        if (q(i, static_cast<Eigen::Index>(lo)) <= y && y <= q(i, static_cast<Eigen::Index>(hi))) {
          ++inside;
        }
      }
      r.target_coverage = 1.0 - 2.0 * tail;
      r.coverage = static_cast<double>(inside) / static_cast<double>(n);
    }
    report.per_alpha.push_back(r);
  }
  return report;
}

void validate_config(const BenchmarkConfig& config) {
  require(!config.methods.empty(), ErrorCode::kInvalidInput, "benchmark needs at least one method");
  require(config.n_splits >= 1, ErrorCode::kInvalidInput, "benchmark needs at least one split");
  require(config.train_fraction > 0.0 && config.train_fraction < 1.0, ErrorCode::kInvalidInput,
          "train fraction must lie strictly between 0 and 1");
  require(!config.alphas.empty(), ErrorCode::kInvalidInput, "benchmark needs quantile levels");
  for (double a : config.alphas) {
    require(a > 0.0 && a < 1.0, ErrorCode::kInvalidInput,
            "quantile levels must lie strictly between 0 and 1");
  }
}

std::string csv_number(double v) { return format_double(v); }

}  // namespace

nlohmann::json to_json(const BenchmarkConfig& config) {
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : config.methods) methods.push_back(to_string(m));
  return {{"dataset", config.dataset_label},
          {"methods", methods},
          {"n_splits", config.n_splits},
          {"train_fraction", config.train_fraction},
          {"train_size", config.train_size},
          {"alphas", config.alphas},
          {"seed", config.seed},
          {"kernel", to_string(config.models.kernel)},
          {"bandwidth", to_string(config.models.bandwidth)},
          {"forest", {{"n_trees", config.models.forest.n_trees}, {"min_node_size", config.models.forest.min_node_size}}},
          {"boost",
           {{"max_trees", config.models.boost.max_trees},
            {"shrinkage", config.models.boost.shrinkage},
            {"depth", config.models.boost.depth},
            {"subsample_fraction", config.models.boost.subsample_fraction},
            {"min_leaf_size", config.models.boost.min_leaf_size}}},
          {"ridge_grid_size", config.models.ridge_grid_size},
          {"folds", config.models.folds},
          {"guards",
           {{"enabled", config.guards.enabled},
            {"min_rows", config.guards.min_rows},
            {"max_rows", config.guards.max_rows},
            {"min_distinct_responses", config.guards.min_distinct_responses}}}};
}

BenchmarkResult run_benchmark(const Dataset& data, const BenchmarkConfig& config) {
  data.validate();
  validate_config(config);
  BenchmarkResult result;
  result.dataset = config.dataset_label;
  result.config = config;
  if (auto reason = check_guards(data, config.guards)) {
    result.skipped = true;
    result.skip_reason = *reason;
    return result;
  }

  const std::vector<double> levels = evaluation_levels(config.alphas);
  const std::size_t n = data.rows();
  const auto n_train =
      config.train_size > 0
          ? config.train_size
          : static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(n)));
  require(n_train >= 2 && n_train < n, ErrorCode::kInvalidInput,
          "train fraction leaves an empty training or test set");

  for (std::size_t split = 0; split < config.n_splits; ++split) {
    SplitSummary summary;
    summary.split = split;
    summary.seed = derive_seed(config.seed, split);
    const std::uint64_t s = summary.seed;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(s, 0));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    const Dataset train = data.subset(train_rows);
    const Dataset test = data.subset(test_rows);
    summary.n_train = train.rows();
    summary.n_test = test.rows();

    BaseModels base = fit_base_models(train, config.methods, config.models, s, true);
    summary.selections = base.selections;
    for (const auto& [name, report] : base.selections) {
      if (report.fallback) {
        summary.warnings.push_back(name + ": no candidate passed the overfitting guard; "
                                          "selected by train/validation ratio");
      }
    }
    std::vector<double> rmses;
    for (const auto* m : {&base.lm, &base.gb, &base.rf}) {
      if (!*m) continue;
      const double r = rmse(test.responses, predict(**m, test.covariates));
      summary.base_test_rmse[model_name(**m)] = r;
      rmses.push_back(r);
    }
    summary.sigma_hat = residual_scale_estimate(rmses);

    std::vector<QuantilePredictions> all;
    for (Method method : config.methods) {
      QuantilePredictions mq =
          predict_quantiles(method, base, train, test.covariates, levels, config.models, s);
      for (auto& [name, report] : mq.selections) summary.selections[name] = std::move(report);
      for (auto& w : mq.warnings) summary.warnings.push_back(std::move(w));
      all.push_back(std::move(mq));
    }
    for (const QuantilePredictions& mq : all) {
      result.reports.push_back(score(mq, test, levels, config, summary));
    }
    result.splits.push_back(std::move(summary));
  }
  return result;
}

nlohmann::json to_json(const EvalReport& report) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json per_alpha = nlohmann::json::array();
  for (const AlphaResult& r : report.per_alpha) {
    per_alpha.push_back({{"alpha", r.alpha},
                         {"quantile_error", number(r.error)},
                         {"partner_error", number(r.partner_error)},
                         {"combined_error", number(r.combined)},
                         {"scaled_quantile_error", number(r.scaled_error)},
                         {"scaled_combined_error", number(r.scaled_combined)},
                         {"target_coverage", number(r.target_coverage)},
                         {"coverage", number(r.coverage)}});
  }
  return {{"method", report.method},
          {"dataset", report.dataset},
          {"split", report.split},
          {"seed", report.seed},
          {"n_test", report.n_test},
          {"sigma_hat", report.sigma_hat},
          {"crossing_queries", report.crossing_queries},
          {"crossed_intervals", report.crossed_intervals},
          {"fallback_queries", report.fallback_queries},
          {"per_alpha", per_alpha}};
}

nlohmann::json to_json(const BenchmarkResult& result) {
  nlohmann::json splits = nlohmann::json::array();
  for (const SplitSummary& s : result.splits) {
    nlohmann::json selections = nlohmann::json::object();
    for (const auto& [name, report] : s.selections) {
      nlohmann::json j = to_json(report);
      j.erase("candidates");  // full candidate tables are large; keep the decision
      j["n_candidates"] = report.candidates.size();
      j["chosen_train_error"] = report.chosen().train_error;
      j["chosen_validation_error"] = report.chosen().validation_error;
      j["chosen_hyperparameters"] = report.chosen().hyperparameters;
      selections[name] = std::move(j);
    }
    splits.push_back({{"split", s.split},
                      {"seed", s.seed},
                      {"n_train", s.n_train},
                      {"n_test", s.n_test},
                      {"sigma_hat", s.sigma_hat},
                      {"base_test_rmse", s.base_test_rmse},
                      {"selections", selections},
                      {"warnings", s.warnings}});
  }
  nlohmann::json reports = nlohmann::json::array();
  for (const EvalReport& r : result.reports) reports.push_back(to_json(r));
  return {{"dataset", result.dataset},
          {"skipped", result.skipped},
          {"skip_reason", result.skip_reason},
          {"config", to_json(result.config)},
          {"splits", splits},
          {"reports", reports}};
}

void write_report_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "dataset,split,seed,method,alpha,quantile_error,partner_error,combined_error,"
         "scaled_quantile_error,scaled_combined_error,target_coverage,coverage,sigma_hat\n";
  for (const EvalReport& r : result.reports) {
    for (const AlphaResult& a : r.per_alpha) {
      out << r.dataset << ',' << r.split << ',' << r.seed << ',' << r.method << ','
          << csv_number(a.alpha) << ',' << csv_number(a.error) << ','
          << csv_number(a.partner_error) << ',' << csv_number(a.combined) << ','
          << csv_number(a.scaled_error) << ',' << csv_number(a.scaled_combined) << ','
          << csv_number(a.target_coverage) << ',' << csv_number(a.coverage) << ','
          << csv_number(r.sigma_hat) << '\n';
    }
  }
}

namespace {

struct Accumulator {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double v) {
    if (!std::isfinite(v)) return;
    sum += v;
    ++count;
  }
  double mean() const { return count == 0 ? kNaN : sum / static_cast<double>(count); }
};

// Tail levels (alpha <= 0.5) present in the requested list, ascending.
std::vector<double> tail_levels(const BenchmarkConfig& config) {
  std::vector<double> tails;
  for (double a : config.alphas) {
    const double t = std::min(a, 1.0 - a);
    if (std::none_of(tails.begin(), tails.end(), [&](double u) { return same_level(u, t); })) {
      tails.push_back(t);
    }
  }
  std::sort(tails.begin(), tails.end());
  return tails;
}

const AlphaResult* find_alpha(const EvalReport& r, double tail) {
  for (const AlphaResult& a : r.per_alpha) {
    if (same_level(a.alpha, tail)) return &a;
  }
  for (const AlphaResult& a : r.per_alpha) {
    if (same_level(a.alpha, 1.0 - tail)) return &a;
  }
  return nullptr;
}

}  // namespace

void write_boxplot_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "dataset,method,alpha,mean_scaled_combined_error,mean_coverage,target_coverage,splits\n";
  for (Method m : result.config.methods) {
    const std::string name = to_string(m);
    for (double tail : tail_levels(result.config)) {
      Accumulator err, cov;
      for (const EvalReport& r : result.reports) {
        if (r.method != name) continue;
        if (const AlphaResult* a = find_alpha(r, tail)) {
          err.add(a->scaled_combined);
          cov.add(a->coverage);
        }
      }
      const double target = same_level(tail, 0.5) ? kNaN : 1.0 - 2.0 * tail;
      out << result.dataset << ',' << name << ',' << csv_number(tail) << ','
          << csv_number(err.mean()) << ',' << csv_number(cov.mean()) << ','
          << csv_number(target) << ',' << err.count << '\n';
    }
  }
}

void write_pairwise_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "dataset,base_model,alpha,tail,kernel_method_error,direct_method_error\n";
  const std::pair<Method, Method> pairs[] = {{Method::kKernelRF, Method::kDirectRF},
                                             {Method::kKernelGB, Method::kDirectGB},
                                             {Method::kKernelLM, Method::kDirectLM}};
  for (const auto& [kernel, direct] : pairs) {
    if (!wants(result.config.methods, kernel) || !wants(result.config.methods, direct)) continue;
    const std::string base = to_string(kernel).substr(1);
    for (double tail : tail_levels(result.config)) {
      if (same_level(tail, 0.5)) continue;
      for (const bool left : {true, false}) {
        Accumulator ours, theirs;
        for (const EvalReport& r : result.reports) {
          const AlphaResult* a = find_alpha(r, tail);
          if (a == nullptr) continue;
          // find_alpha prefers the left level; flip to the partner for the right tail.
          const bool at_left = same_level(a->alpha, tail);
          const double v = (left == at_left) ? a->error : a->partner_error;
          if (r.method == to_string(kernel)) ours.add(v);
          if (r.method == to_string(direct)) theirs.add(v);
        }
        out << result.dataset << ',' << base << ',' << csv_number(tail) << ','
            << (left ? "left" : "right") << ',' << csv_number(ours.mean()) << ','
            << csv_number(theirs.mean()) << '\n';
      }
    }
  }
}

void write_benchmark_outputs(const BenchmarkResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorCode::kIoError,
          "cannot create output directory " + dir.string());
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    require(f.good(), ErrorCode::kIoError, "cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("report.json");
    f << to_json(result).dump(2) << '\n';
  }
  {
    auto f = open("report.csv");
    write_report_csv(f, result);
  }
  {
    auto f = open("plot_boxplot.csv");
    write_boxplot_csv(f, result);
  }
  {
    auto f = open("plot_pairwise.csv");
    write_pairwise_csv(f, result);
  }
}

}  // namespace condquant
