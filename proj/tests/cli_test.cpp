#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "golden.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using golden::first_line;
using golden::schema_text;
using golden::slurp;

std::string golden_file(const std::string& name) { return slurp(fs::path(CONDQUANT_GOLDEN_DIR) / name); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ("condquant_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "condquant");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return condquant::cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  fs::path simulate(const std::string& name, const std::string& scenario, int n_train, int n_test,
                    int seed) {
    const fs::path dir = root_ / name;
    EXPECT_EQ(run({"simulate", "--scenario", scenario, "--n-train", std::to_string(n_train),
                   "--n-test", std::to_string(n_test), "--seed", std::to_string(seed), "--out",
                   dir.string()}),
              0)
        << err_.str();
    return dir;
  }

  int fit(const fs::path& data, const std::string& method, const fs::path& out,
          std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"fit-quantiles", "--train", (data / "train.csv").string(),
                                  "--query", (data / "test.csv").string(), "--method", method,
                                  "--out", out.string(), "--trees", "30", "--boost-trees", "40",
                                  "--ridge-grid", "5"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  fs::path root_;
  std::ostringstream out_;
  std::ostringstream err_;
};

}  // namespace

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("fit-quantiles"), std::string::npos);
}

TEST_F(CliTest, ParseErrorsExitTwo) {
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"simulate", "--bogus"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
}

TEST_F(CliTest, SimulateDefaultsAndOutputs) {
  condquant::cli::RunConfig defaults;
  EXPECT_EQ(defaults.n_train, 7500u);
  EXPECT_EQ(defaults.n_test, 2500u);
  const fs::path dir = simulate("sim", "ii", 40, 15, 3);
  EXPECT_EQ(first_line(dir / "train.csv"), golden_file("train.header"));
  EXPECT_EQ(first_line(dir / "test.csv"), golden_file("train.header"));
  EXPECT_EQ(first_line(dir / "oracle_quantiles.csv"), golden_file("oracle_quantiles.header"));
  const json sidecar = json::parse(slurp(dir / "scenario.json"));
  EXPECT_EQ(schema_text(sidecar), golden_file("scenario.schema"));
  EXPECT_EQ(sidecar["n_train"], 40);
  EXPECT_EQ(sidecar["generated"]["direction"].size(), 5u);
  // Header plus 15 test rows times nine default levels.
  const std::string oracle = slurp(dir / "oracle_quantiles.csv");
  EXPECT_EQ(std::count(oracle.begin(), oracle.end(), '\n'), 1 + 15 * 9);
}

TEST_F(CliTest, SimulateRejectsEmptyTrainingSet) {
  EXPECT_EQ(run({"simulate", "--scenario", "i", "--n-train", "0", "--out", (root_ / "x").string()}), 2);
  EXPECT_NE(err_.str().find("n-train"), std::string::npos);
  EXPECT_EQ(run({"simulate", "--scenario", "vii", "--out", (root_ / "x").string()}), 2);
}

TEST_F(CliTest, SidecarRegeneratesIdenticalFiles) {
  const fs::path a = simulate("a", "v", 60, 20, 11);
  ASSERT_EQ(run({"simulate", "--config", (a / "scenario.json").string(), "--out", (root_ / "b").string()}), 0)
      << err_.str();
  for (const char* f : {"train.csv", "test.csv", "oracle_quantiles.csv", "scenario.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(root_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const fs::path cfg = root_ / "cfg.json";
  std::ofstream(cfg) << R"({"scenario": "iii", "n_train": 30, "n_test": 10, "seed": 4})";
  ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--n-train", "12", "--out", (root_ / "o").string()}), 0);
  const json sidecar = json::parse(slurp(root_ / "o" / "scenario.json"));
  EXPECT_EQ(sidecar["n_train"], 12);
  EXPECT_EQ(sidecar["n_test"], 10);
  EXPECT_EQ(sidecar["scenario"], "iii");
  std::ofstream(cfg) << R"({"scenario": "iii", "colour": 1})";
  EXPECT_EQ(run({"simulate", "--config", cfg.string(), "--out", (root_ / "p").string()}), 2);
}

TEST_F(CliTest, FitQuantilesSchemaAndOrdering) {
  const fs::path data = simulate("sim", "iii", 300, 60, 5);
  const fs::path out = root_ / "fit";
  ASSERT_EQ(fit(data, "qLM", out), 0) << err_.str();
  EXPECT_EQ(first_line(out / "quantiles.csv"), golden_file("quantiles.header"));
  EXPECT_EQ(first_line(out / "intervals.csv"), golden_file("intervals.header"));
  const json diag = json::parse(slurp(out / "diagnostics.json"));
  EXPECT_EQ(schema_text(diag), golden_file("diagnostics.schema"));
  EXPECT_EQ(diag["crossing_queries"], 0);
  EXPECT_EQ(diag["n_query"], 60);
  const json sel = json::parse(slurp(out / "selection.json"));
  EXPECT_EQ(schema_text(sel), golden_file("selection.schema"));
  // Every interval row of a kernel method is uncrossed.
  std::ifstream in(out / "intervals.csv");
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.back(), '0') << line;
    ++rows;
  }
  EXPECT_EQ(rows, 60u * 4u);
}

TEST_F(CliTest, DirectLinearFitRecordsCrossings) {
  const fs::path data = simulate("sim", "iii", 1000, 200, 5);
  const fs::path out = root_ / "fit";
  ASSERT_EQ(fit(data, "QLM", out), 0) << err_.str();
  const json diag = json::parse(slurp(out / "diagnostics.json"));
  const std::size_t crossing = diag["crossing_queries"].get<std::size_t>();
  EXPECT_EQ(diag["crossing_query_indices"].size(), crossing);
  // Scenario iii is curved enough that straight quantile lines cross inside the data.
  EXPECT_GT(crossing, 0u);
  EXPECT_NE(err_.str().find("crossing quantiles"), std::string::npos);
}

TEST_F(CliTest, FitQuantilesDeterministic) {
  const fs::path data = simulate("sim", "i", 200, 30, 6);
  for (const char* method : {"qRF", "QGB"}) {
    ASSERT_EQ(fit(data, method, root_ / "a", {"--seed", "9"}), 0) << err_.str();
    ASSERT_EQ(fit(data, method, root_ / "b", {"--seed", "9"}), 0) << err_.str();
    for (const char* f : {"quantiles.csv", "intervals.csv", "selection.json", "diagnostics.json"}) {
      EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << method << " " << f;
    }
  }
}

TEST_F(CliTest, FitQuantilesInputErrors) {
  const fs::path data = simulate("sim", "i", 50, 10, 6);
  EXPECT_EQ(fit(data, "qXX", root_ / "a"), 2);
  EXPECT_EQ(run({"fit-quantiles", "--train", (root_ / "none.csv").string(), "--query",
                 (data / "test.csv").string(), "--method", "qLM", "--out", (root_ / "a").string()}),
            2);
  EXPECT_EQ(fit(data, "qLM", root_ / "a", {"--alphas", "0,0.5"}), 2);
  EXPECT_EQ(fit(data, "qLM", root_ / "a", {"--guards"}), 3);
  EXPECT_NE(err_.str().find("fewer than 500 observations"), std::string::npos);
}

TEST_F(CliTest, ConstantResponseIsNumericalFailure) {
  const fs::path dir = root_ / "flat";
  fs::create_directories(dir);
  std::ofstream train(dir / "train.csv");
  train << "x,y\n";
  for (int i = 0; i < 60; ++i) train << i << ",2\n";
  train.close();
  std::ofstream(dir / "test.csv") << "x\n1\n2\n";
  EXPECT_EQ(fit(dir, "qLM", root_ / "o", {"--bandwidth", "silverman"}), 4) << err_.str();
}

TEST_F(CliTest, BenchmarkScenarioSchemaAndRowCount) {
  const fs::path out = root_ / "bench";
  ASSERT_EQ(run({"benchmark", "--scenario", "v", "--n-train", "150", "--n-test", "50", "--splits",
                 "2", "--method", "qRF,QRF,qLM", "--trees", "20", "--boost-trees", "30",
                 "--ridge-grid", "5", "--out", out.string()}),
            0)
      << err_.str();
  EXPECT_EQ(first_line(out / "report.csv"), golden_file("report.header"));
  EXPECT_EQ(first_line(out / "plot_boxplot.csv"), golden_file("plot_boxplot.header"));
  EXPECT_EQ(first_line(out / "plot_pairwise.csv"), golden_file("plot_pairwise.header"));
  const std::string report = slurp(out / "report.csv");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 1 + 3 * 9 * 2);
  const json j = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(schema_text(j, {"/splits/[]/selections/", "/splits/[]/base_test_rmse/"}),
            golden_file("report.schema"));
}

TEST_F(CliTest, BenchmarkSeedChangesValuesNotSchema) {
  auto bench = [&](const std::string& seed, const fs::path& out) {
    return run({"benchmark", "--scenario", "i", "--n-train", "100", "--n-test", "40", "--splits",
                "1", "--method", "qLM", "--ridge-grid", "4", "--seed", seed, "--out", out.string()});
  };
  ASSERT_EQ(bench("1", root_ / "a"), 0);
  ASSERT_EQ(bench("1", root_ / "b"), 0);
  ASSERT_EQ(bench("2", root_ / "c"), 0);
  EXPECT_EQ(slurp(root_ / "a" / "report.csv"), slurp(root_ / "b" / "report.csv"));
  EXPECT_EQ(slurp(root_ / "a" / "report.json"), slurp(root_ / "b" / "report.json"));
  EXPECT_NE(slurp(root_ / "a" / "report.csv"), slurp(root_ / "c" / "report.csv"));
  EXPECT_EQ(schema_text(json::parse(slurp(root_ / "a" / "report.json"))),
            schema_text(json::parse(slurp(root_ / "c" / "report.json"))));
}

TEST_F(CliTest, BenchmarkGuardRejectionExitsThree) {
  ASSERT_EQ(run({"benchmark", "--scenario", "i", "--n-train", "100", "--n-test", "40", "--method",
                 "qLM", "--guards", "--out", (root_ / "g").string()}),
            3);
  EXPECT_NE(err_.str().find("guard rejection: fewer than 500 observations"), std::string::npos);
  const json j = json::parse(slurp(root_ / "g" / "report.json"));
  EXPECT_EQ(j["skipped"], true);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = CONDQUANT_BINARY;
  const std::string quiet = " >/dev/null 2>&1";
  auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
  EXPECT_EQ(status(std::system((bin + " --help" + quiet).c_str())), 0);
  EXPECT_EQ(status(std::system((bin + " simulate --scenario i --n-train 0 --out " +
                                (root_ / "z").string() + quiet)
                                   .c_str())),
            2);
  EXPECT_EQ(status(std::system((bin + " simulate --scenario i --n-train 20 --n-test 5 --out " +
                                (root_ / "z").string() + quiet)
                                   .c_str())),
            0);
  EXPECT_TRUE(fs::exists(root_ / "z" / "train.csv"));
}
