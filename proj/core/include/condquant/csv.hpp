#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "condquant/dataset.hpp"

namespace condquant {

// Shortest decimal text that parses back to the identical double; "" for NaN.
std::string format_double(double value);

// Column name, or zero-based column index.
using ColumnRef = std::variant<std::string, std::size_t>;

struct ColumnEncoding {
  std::string name;
  bool categorical = false;
  std::vector<std::string> categories;  // sorted; one indicator column each
};

// Covariate encoding learned from a training file; applied to query files.
struct CsvSchema {
  std::vector<ColumnEncoding> columns;  // covariate source columns, file order
  std::string response_name;
  std::vector<std::string> feature_names;  // encoded covariate names
};

struct IngestResult {
  Dataset data;
  CsvSchema schema;
  std::vector<std::string> diagnostics;  // one per rejected row
};

// Comma-separated, '.' decimal. Numeric columns become covariates directly;
// other columns are one-hot encoded with lexicographically sorted categories.
// Rows with missing or unparseable values are rejected with diagnostics.
// Without a header, columns are named c0, c1, ...; the default response is
// the last column.
IngestResult ingest_csv(const std::filesystem::path& path,
                        const std::optional<ColumnRef>& response = std::nullopt,
                        bool header = true);

struct CovariateRows {
  Eigen::MatrixXd covariates;
  std::vector<std::size_t> source_rows;  // 1-based line numbers of kept rows
  std::vector<std::string> diagnostics;
};

// Encodes a query file with a training schema. A column named like the
// response is ignored if present; unseen categories reject the row.
CovariateRows ingest_covariates(const std::filesystem::path& path, const CsvSchema& schema,
                                bool header = true);

void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::string& response_name = "y");
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& response_name = "y");

}  // namespace condquant
