#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "condquant/error.hpp"
#include "condquant/eval.hpp"

namespace condquant::cli {

// Flag values for every subcommand. A JSON config file uses the long flag
// names (dashes or underscores) as keys; flags given on the command line win.
struct RunConfig {
  std::string train;
  std::string query;
  std::string out;
  std::string response;  // name or zero-based index; default is the last column
  bool no_header = false;

  std::string scenario;
  std::size_t n_train = 7500;
  std::size_t n_test = 2500;

  std::vector<std::string> methods;
  std::vector<double> alphas = default_alphas();
  std::uint64_t seed = 1;
  std::string kernel = "gaussian";
  std::string bandwidth = "silverman";
  bool guards = false;

  std::size_t splits = 10;
  double train_fraction = 0.7;
  std::size_t trees = 500;
  std::size_t boost_trees = 1000;
  std::size_t folds = 5;
  std::size_t ridge_grid = 20;
};

// 0 success, 2 invalid input, 3 guard rejection, 4 numerical failure.
int exit_code(ErrorCode code);

// Writes train.csv, test.csv, scenario.json and oracle_quantiles.csv.
void command_simulate(const RunConfig& config, std::ostream& log);

// Writes quantiles.csv, intervals.csv, selection.json and diagnostics.json.
// Returns the process exit code.
int command_fit_quantiles(const RunConfig& config, std::ostream& log);

// Writes report.json, report.csv, plot_boxplot.csv and plot_pairwise.csv.
int command_benchmark(const RunConfig& config, std::ostream& log);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace condquant::cli
