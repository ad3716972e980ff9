#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "condquant/csv.hpp"
#include "condquant/random.hpp"
#include "condquant/simgen.hpp"

namespace condquant::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Sidecar block written by `simulate`; informational, skipped when the
// sidecar is read back as a config file.
constexpr const char* kGeneratedKey = "generated";

fs::path prepare_out_dir(const std::string& out) {
  require(!out.empty(), ErrorCode::kInvalidInput, "--out is required");
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kIoError,
          "cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::kIoError, "cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& value) {
  auto f = open_output(path);
  f << value.dump(2) << '\n';
}

std::optional<ColumnRef> response_ref(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
    return ColumnRef{static_cast<std::size_t>(std::stoull(text))};
  }
  return ColumnRef{text};
}

ModelSettings model_settings(const RunConfig& config) {
  ModelSettings s;
  s.kernel = parse_kernel(config.kernel);
  s.bandwidth = parse_bandwidth(config.bandwidth);
  require(config.trees >= 1, ErrorCode::kInvalidInput, "--trees must be positive");
  require(config.boost_trees >= 1, ErrorCode::kInvalidInput, "--boost-trees must be positive");
  s.forest.n_trees = config.trees;
  s.boost.max_trees = config.boost_trees;
  s.ridge_grid_size = config.ridge_grid;
  s.folds = config.folds;
  return s;
}

void check_alphas(const std::vector<double>& alphas) {
  require(!alphas.empty(), ErrorCode::kInvalidInput, "--alphas must not be empty");
  for (double a : alphas) {
    require(a > 0.0 && a < 1.0, ErrorCode::kInvalidInput,
            "quantile levels must lie strictly between 0 and 1");
  }
}

std::string config_flag(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

std::vector<std::string> config_values(const std::string& key, const json& value) {
  auto scalar = [&](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    raise(ErrorCode::kInvalidInput, "config key '" + key + "' has an unsupported value");
  };
  std::vector<std::string> out;
  if (value.is_array()) {
    for (const json& v : value) out.push_back(scalar(v));
  } else {
    out.push_back(scalar(value));
  }
  return out;
}

// Applies config-file values to every option the command line left unset.
void apply_config_file(CLI::App& command, const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "cannot open config file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::kInvalidInput, "config file " + path + ": " + e.what());
  }
  require(doc.is_object(), ErrorCode::kInvalidInput, "config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == kGeneratedKey || key == "config") continue;
    CLI::Option* opt = command.get_option_no_throw(config_flag(key));
    require(opt != nullptr, ErrorCode::kInvalidInput,
            "unknown config key '" + key + "' for " + command.get_name());
    if (opt->count() > 0) continue;
    for (const std::string& v : config_values(key, value)) opt->add_result(v);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      raise(ErrorCode::kInvalidInput, "config key '" + key + "': " + e.what());
    }
  }
}

void add_common_model_options(CLI::App& cmd, RunConfig& c) {
  cmd.add_option("--alphas", c.alphas, "Quantile levels, comma separated")->delimiter(',');
  cmd.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  cmd.add_option("--kernel", c.kernel, "gaussian, polyexp or polyexp:ORDER")->capture_default_str();
  cmd.add_option("--bandwidth", c.bandwidth, "silverman or a positive number")
      ->capture_default_str();
  cmd.add_option("--trees", c.trees, "Random forest size")->capture_default_str();
  cmd.add_option("--boost-trees", c.boost_trees, "Maximum boosting stages")->capture_default_str();
  cmd.add_option("--folds", c.folds, "Cross-validation folds")->capture_default_str();
  cmd.add_option("--ridge-grid", c.ridge_grid, "Ridge penalty grid size")->capture_default_str();
  cmd.add_flag("--guards", c.guards, "Reject datasets outside the benchmark size limits");
  cmd.add_option("--response", c.response, "Response column name or zero-based index");
  cmd.add_flag("--no-header", c.no_header, "Input CSV files have no header row");
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kGuardRejection:
      return 3;
    case ErrorCode::kNumericalFailure:
    case ErrorCode::kDegenerateSample:
      return 4;
    default:
      return 2;
  }
}

void command_simulate(const RunConfig& config, std::ostream& log) {
  require(!config.scenario.empty(), ErrorCode::kInvalidInput, "--scenario is required");
  const ScenarioId id = parse_scenario(config.scenario);
  require(config.n_train >= 1, ErrorCode::kInvalidInput, "--n-train must be positive");
  require(config.n_test >= 1, ErrorCode::kInvalidInput, "--n-test must be positive");
  check_alphas(config.alphas);
  const fs::path dir = prepare_out_dir(config.out);

  const std::uint64_t direction_seed = derive_seed(config.seed, 0);
  const std::uint64_t train_cov = derive_seed(config.seed, 1);
  const std::uint64_t test_cov = derive_seed(config.seed, 2);
  const std::uint64_t train_resp = derive_seed(config.seed, 3);
  const std::uint64_t test_resp = derive_seed(config.seed, 4);
  const ScenarioSpec spec = make_scenario(id, direction_seed);

  const Dataset train = sample_scenario(spec, config.n_train, train_cov, train_resp);
  const Dataset test = sample_scenario(spec, config.n_test, test_cov, test_resp);
  write_dataset_csv(dir / "train.csv", train);
  write_dataset_csv(dir / "test.csv", test);

  {
    auto f = open_output(dir / "oracle_quantiles.csv");
    f << "row,alpha,quantile\n";
    std::vector<double> x(kScenarioDimension);
    for (std::size_t i = 0; i < test.rows(); ++i) {
      for (std::size_t j = 0; j < kScenarioDimension; ++j) {
        x[j] = test.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      for (double a : config.alphas) {
        f << i << ',' << format_double(a) << ',' << format_double(true_quantile(spec, x, a)) << '\n';
      }
    }
  }

  json sidecar = {{"scenario", to_string(id)},
                  {"seed", config.seed},
                  {"n_train", config.n_train},
                  {"n_test", config.n_test},
                  {"alphas", config.alphas},
                  {kGeneratedKey,
                   {{"direction", spec.direction},
                    {"direction_seed", direction_seed},
                    {"train_covariate_seed", train_cov},
                    {"test_covariate_seed", test_cov},
                    {"train_response_seed", train_resp},
                    {"test_response_seed", test_resp},
                    {"dimension", kScenarioDimension}}}};
  write_json(dir / "scenario.json", sidecar);
  log << "scenario " << to_string(id) << ": wrote " << train.rows() << " training and "
      << test.rows() << " test rows to " << dir.string() << '\n';
}

int command_fit_quantiles(const RunConfig& config, std::ostream& log) {
  require(!config.train.empty(), ErrorCode::kInvalidInput, "--train is required");
  require(!config.query.empty(), ErrorCode::kInvalidInput, "--query is required");
  require(config.methods.size() == 1, ErrorCode::kInvalidInput,
          "fit-quantiles needs exactly one --method");
  const Method method = parse_method(config.methods.front());
  check_alphas(config.alphas);
  const ModelSettings settings = model_settings(config);
  const bool header = !config.no_header;

  const IngestResult train = ingest_csv(config.train, response_ref(config.response), header);
  train.data.validate();
  if (config.guards) {
    GuardConfig guards;
    guards.enabled = true;
    if (auto reason = check_guards(train.data, guards)) {
      raise(ErrorCode::kGuardRejection, "dataset rejected: " + *reason);
    }
  }
  const CovariateRows query = ingest_covariates(config.query, train.schema, header);
  const fs::path dir = prepare_out_dir(config.out);

  const std::vector<double> levels = evaluation_levels(config.alphas);
  const Method methods[] = {method};
  const BaseModels base = fit_base_models(train.data, methods, settings, config.seed);
  const QuantilePredictions pred =
      predict_quantiles(method, base, train.data, query.covariates, levels, settings, config.seed);

  std::map<std::string, SelectionReport> selections = base.selections;
  for (const auto& [name, report] : pred.selections) selections[name] = report;
  std::vector<std::string> warnings = pred.warnings;
  bool selection_fallback = false;
  for (const auto& [name, report] : selections) {
    if (!report.fallback) continue;
    selection_fallback = true;
    const std::string w = name + ": no candidate passed the overfitting guard; selected by "
                                 "train/validation ratio";
    warnings.push_back(w);
  }

  {
    auto f = open_output(dir / "quantiles.csv");
    f << "query,alpha,quantile\n";
    for (Eigen::Index i = 0; i < pred.values.rows(); ++i) {
      for (std::size_t k = 0; k < levels.size(); ++k) {
        f << i << ',' << format_double(levels[k]) << ','
          << format_double(pred.values(i, static_cast<Eigen::Index>(k))) << '\n';
      }
    }
  }
  {
    auto f = open_output(dir / "intervals.csv");
    f << "query,alpha,lower,upper,crossed\n";
    for (Eigen::Index i = 0; i < pred.values.rows(); ++i) {
      for (std::size_t k = 0; k < levels.size() && levels[k] < 0.5; ++k) {
        const auto hi = static_cast<Eigen::Index>(level_index(levels, 1.0 - levels[k]));
        const double lower = pred.values(i, static_cast<Eigen::Index>(k));
        const double upper = pred.values(i, hi);
        f << i << ',' << format_double(levels[k]) << ',' << format_double(lower) << ','
          << format_double(upper) << ',' << (lower > upper ? 1 : 0) << '\n';
      }
    }
  }
  json selection_json = json::object();
  for (const auto& [name, report] : selections) selection_json[name] = to_json(report);
  write_json(dir / "selection.json", {{"method", to_string(method)}, {"selections", selection_json}});

  const std::vector<std::size_t> crossing = crossing_queries(pred.values);
  write_json(dir / "diagnostics.json",
             {{"method", to_string(method)},
              {"n_train", train.data.rows()},
              {"n_query", static_cast<std::size_t>(query.covariates.rows())},
              {"query_lines", query.source_rows},
              {"rejected_train_rows", train.diagnostics},
              {"rejected_query_rows", query.diagnostics},
              {"crossing_queries", crossing.size()},
              {"crossing_query_indices", crossing},
              {"fallback_queries", pred.fallback_queries},
              {"oob_substituted", pred.substituted_fitted},
              {"selection_fallback", selection_fallback},
              {"warnings", warnings}});

  for (const std::string& w : warnings) log << "WARNING: " << w << '\n';
  if (!train.diagnostics.empty() || !query.diagnostics.empty()) {
    log << "rejected " << train.diagnostics.size() << " training and " << query.diagnostics.size()
        << " query rows; see diagnostics.json\n";
  }
  if (!crossing.empty()) {
    log << to_string(method) << ": " << crossing.size() << " of " << query.covariates.rows()
        << " queries have crossing quantiles\n";
  }
  log << to_string(method) << ": wrote quantiles for " << query.covariates.rows()
      << " queries to " << dir.string() << '\n';
  return 0;
}

int command_benchmark(const RunConfig& config, std::ostream& log) {
  require(config.train.empty() != config.scenario.empty(), ErrorCode::kInvalidInput,
          "benchmark needs exactly one of --train or --scenario");
  check_alphas(config.alphas);
  BenchmarkConfig bench;
  bench.models = model_settings(config);
  bench.n_splits = config.splits;
  bench.train_fraction = config.train_fraction;
  bench.alphas = config.alphas;
  bench.seed = config.seed;
  bench.guards.enabled = config.guards;
  if (!config.methods.empty()) {
    bench.methods.clear();
    for (const std::string& m : config.methods) {
      const Method parsed = parse_method(m);
      if (std::find(bench.methods.begin(), bench.methods.end(), parsed) == bench.methods.end()) {
        bench.methods.push_back(parsed);
      }
    }
  }

  Dataset data;
  if (!config.scenario.empty()) {
    const ScenarioId id = parse_scenario(config.scenario);
    require(config.n_train >= 2 && config.n_test >= 1, ErrorCode::kInvalidInput,
            "scenario benchmark needs --n-train >= 2 and --n-test >= 1");
    const ScenarioSpec spec = make_scenario(id, derive_seed(config.seed, 0));
    data = sample_scenario(spec, config.n_train + config.n_test, derive_seed(config.seed, 1),
                           derive_seed(config.seed, 3));
    bench.train_size = config.n_train;
    bench.dataset_label = "scenario-" + to_string(id);
  } else {
    IngestResult ingested =
        ingest_csv(config.train, response_ref(config.response), !config.no_header);
    if (!ingested.diagnostics.empty()) {
      log << "rejected " << ingested.diagnostics.size() << " rows of " << config.train << '\n';
    }
    data = std::move(ingested.data);
    bench.dataset_label = fs::path(config.train).stem().string();
  }

  const fs::path dir = prepare_out_dir(config.out);
  const BenchmarkResult result = run_benchmark(data, bench);
  write_benchmark_outputs(result, dir);
  if (result.skipped) {
    log << bench.dataset_label << ": guard rejection: " << result.skip_reason << '\n';
    return 3;
  }
  for (const SplitSummary& s : result.splits) {
    for (const std::string& w : s.warnings) {
      log << "WARNING: split " << s.split << ": " << w << '\n';
    }
  }
  log << bench.dataset_label << ": " << result.reports.size() << " method/split reports written to "
      << dir.string() << '\n';
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional quantile estimation from mean-model fitted values"};
  app.require_subcommand(1);
  RunConfig c;
  std::string config_path;

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic scenario dataset");
  simulate->add_option("--scenario", c.scenario, "Scenario i..v");
  simulate->add_option("--n-train", c.n_train, "Training rows")->capture_default_str();
  simulate->add_option("--n-test", c.n_test, "Test rows")->capture_default_str();
  simulate->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  simulate->add_option("--alphas", c.alphas, "Levels for the oracle quantiles")->delimiter(',');
  simulate->add_option("--out", c.out, "Output directory");
  simulate->add_option("--config", config_path, "JSON config file");

  CLI::App* fit = app.add_subcommand("fit-quantiles", "Fit one method and predict quantiles");
  fit->add_option("--train,--data", c.train, "Training CSV");
  fit->add_option("--query,--test", c.query, "Query CSV");
  fit->add_option("--method", c.methods, "qLM, qGB, qRF, QLM, QGB or QRF");
  fit->add_option("--out", c.out, "Output directory");
  fit->add_option("--config", config_path, "JSON config file");
  add_common_model_options(*fit, c);

  CLI::App* bench = app.add_subcommand("benchmark", "Repeated train/test evaluation");
  bench->add_option("--train,--data", c.train, "Dataset CSV");
  bench->add_option("--scenario", c.scenario, "Scenario i..v instead of a CSV");
  bench->add_option("--n-train", c.n_train, "Scenario training rows")->capture_default_str();
  bench->add_option("--n-test", c.n_test, "Scenario test rows")->capture_default_str();
  bench->add_option("--method", c.methods, "Methods to compare (default: all)")->delimiter(',');
  bench->add_option("--splits", c.splits, "Random splits")->capture_default_str();
  bench->add_option("--train-fraction", c.train_fraction, "Training share of a CSV dataset")
      ->capture_default_str();
  bench->add_option("--out", c.out, "Output directory");
  bench->add_option("--config", config_path, "JSON config file");
  add_common_model_options(*bench, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(*chosen, config_path);
    if (chosen == simulate) {
      command_simulate(c, out);
      return 0;
    }
    if (chosen == fit) return command_fit_quantiles(c, err);
    return command_benchmark(c, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace condquant::cli
