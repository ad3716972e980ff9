#include "condquant/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "condquant/error.hpp"

namespace condquant {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Splits one line; double quotes group commas and "" escapes a quote.
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "?";
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct RawTable {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line per row
};

RawTable read_table(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  require(std::filesystem::is_regular_file(path) && in.good(), ErrorCode::kMissingFile,
          "cannot open " + path.string());
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_names = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (!have_names) {
      if (header) {
        table.names = std::move(fields);
        have_names = true;
        continue;
      }
      for (std::size_t j = 0; j < fields.size(); ++j) table.names.push_back("c" + std::to_string(j));
      have_names = true;
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  require(have_names, ErrorCode::kNoUsableRows, path.string() + " is empty");
  return table;
}

std::size_t resolve_response(const RawTable& table, const std::optional<ColumnRef>& response) {
  if (!response) return table.names.size() - 1;
  if (const auto* index = std::get_if<std::size_t>(&*response)) {
    require(*index < table.names.size(), ErrorCode::kMissingResponseColumn,
            "response column index " + std::to_string(*index) + " out of range");
    return *index;
  }
  const std::string& name = std::get<std::string>(*response);
  const auto it = std::find(table.names.begin(), table.names.end(), name);
  require(it != table.names.end(), ErrorCode::kMissingResponseColumn,
          "response column '" + name + "' not found");
  return static_cast<std::size_t>(it - table.names.begin());
}

// A column is numeric when most of its present cells parse as numbers.
bool majority_numeric(const RawTable& table, std::size_t column) {
  std::size_t present = 0;
  std::size_t numeric = 0;
  for (const auto& row : table.rows) {
    if (column >= row.size() || is_missing(row[column])) continue;
    ++present;
    if (parse_number(row[column])) ++numeric;
  }
  return present > 0 && 2 * numeric > present;
}

std::string diagnostic(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

IngestResult ingest_csv(const std::filesystem::path& path, const std::optional<ColumnRef>& response,
                        bool header) {
  const RawTable table = read_table(path, header);
  const std::size_t width = table.names.size();
  require(width >= 2, ErrorCode::kInvalidInput,
          path.string() + " needs a response and at least one covariate column");
  const std::size_t resp = resolve_response(table, response);
  require(majority_numeric(table, resp), ErrorCode::kNonNumericResponse,
          "response column '" + table.names[resp] + "' is not numeric");

  IngestResult result;
  result.schema.response_name = table.names[resp];
  std::vector<std::size_t> sources;
  for (std::size_t j = 0; j < width; ++j) {
    if (j == resp) continue;
    ColumnEncoding enc;
    enc.name = table.names[j];
    enc.categorical = !majority_numeric(table, j);
    result.schema.columns.push_back(std::move(enc));
    sources.push_back(j);
  }

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != width) {
      result.diagnostics.push_back(diagnostic(table.lines[r], "expected " + std::to_string(width) +
                                                                  " fields, found " +
                                                                  std::to_string(row.size())));
      continue;
    }
    std::string problem;
    if (is_missing(row[resp])) {
      problem = "missing response";
    } else if (!parse_number(row[resp])) {
      problem = "non-numeric response '" + row[resp] + "'";
    }
    for (std::size_t c = 0; c < sources.size() && problem.empty(); ++c) {
      const std::string& cell = row[sources[c]];
      if (is_missing(cell)) {
        problem = "missing value in column '" + table.names[sources[c]] + "'";
      } else if (!result.schema.columns[c].categorical && !parse_number(cell)) {
        problem = "unparseable value '" + cell + "' in column '" + table.names[sources[c]] + "'";
      }
    }
    if (!problem.empty()) {
      result.diagnostics.push_back(diagnostic(table.lines[r], problem));
      continue;
    }
    kept.push_back(r);
  }
  require(!kept.empty(), ErrorCode::kNoUsableRows, "no usable rows in " + path.string());

  for (std::size_t c = 0; c < sources.size(); ++c) {
    ColumnEncoding& enc = result.schema.columns[c];
    if (!enc.categorical) {
      result.schema.feature_names.push_back(enc.name);
      continue;
    }
    for (std::size_t r : kept) enc.categories.push_back(table.rows[r][sources[c]]);
    std::sort(enc.categories.begin(), enc.categories.end());
    enc.categories.erase(std::unique(enc.categories.begin(), enc.categories.end()),
                         enc.categories.end());
    for (const auto& cat : enc.categories) result.schema.feature_names.push_back(enc.name + "=" + cat);
  }

  const auto p = static_cast<Eigen::Index>(result.schema.feature_names.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kept.size()), p);
  std::vector<double> y(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& row = table.rows[kept[i]];
    y[i] = *parse_number(row[resp]);
    Eigen::Index out = 0;
    for (std::size_t c = 0; c < sources.size(); ++c) {
      const ColumnEncoding& enc = result.schema.columns[c];
      const std::string& cell = row[sources[c]];
      if (!enc.categorical) {
        x(static_cast<Eigen::Index>(i), out++) = *parse_number(cell);
        continue;
      }
      const auto it = std::lower_bound(enc.categories.begin(), enc.categories.end(), cell);
      x(static_cast<Eigen::Index>(i), out + (it - enc.categories.begin())) = 1.0;
      out += static_cast<Eigen::Index>(enc.categories.size());
    }
  }
  result.data.covariates = std::move(x);
  result.data.responses = std::move(y);
  result.data.feature_names = result.schema.feature_names;
  return result;
}

CovariateRows ingest_covariates(const std::filesystem::path& path, const CsvSchema& schema,
                                bool header) {
  const RawTable table = read_table(path, header);
  std::vector<std::size_t> sources;
  if (header) {
    for (const ColumnEncoding& enc : schema.columns) {
      const auto it = std::find(table.names.begin(), table.names.end(), enc.name);
      require(it != table.names.end(), ErrorCode::kInvalidInput,
              "covariate column '" + enc.name + "' missing from " + path.string());
      sources.push_back(static_cast<std::size_t>(it - table.names.begin()));
    }
  } else {
    // Without names, covariates are taken positionally; a trailing response
    // column, if present, is ignored.
    require(table.names.size() >= schema.columns.size(), ErrorCode::kInvalidInput,
            path.string() + " has fewer columns than the training covariates");
    for (std::size_t j = 0; j < schema.columns.size(); ++j) sources.push_back(j);
  }

  CovariateRows out;
  const auto p = static_cast<Eigen::Index>(schema.feature_names.size());
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.names.size()) {
      out.diagnostics.push_back(diagnostic(table.lines[r], "expected " +
                                                               std::to_string(table.names.size()) +
                                                               " fields, found " +
                                                               std::to_string(row.size())));
      continue;
    }
    std::vector<double> values(static_cast<std::size_t>(p), 0.0);
    std::string problem;
    std::size_t o = 0;
    for (std::size_t c = 0; c < sources.size() && problem.empty(); ++c) {
      const ColumnEncoding& enc = schema.columns[c];
      const std::string& cell = row[sources[c]];
      if (is_missing(cell)) {
        problem = "missing value in column '" + enc.name + "'";
      } else if (!enc.categorical) {
        if (auto v = parse_number(cell)) {
          values[o++] = *v;
        } else {
          problem = "unparseable value '" + cell + "' in column '" + enc.name + "'";
        }
      } else {
        const auto it = std::lower_bound(enc.categories.begin(), enc.categories.end(), cell);
        if (it == enc.categories.end() || *it != cell) {
          problem = "unseen category '" + cell + "' in column '" + enc.name + "'";
        } else {
          values[o + static_cast<std::size_t>(it - enc.categories.begin())] = 1.0;
          o += enc.categories.size();
        }
      }
    }
    if (!problem.empty()) {
      out.diagnostics.push_back(diagnostic(table.lines[r], problem));
      continue;
    }
    rows.push_back(std::move(values));
    out.source_rows.push_back(table.lines[r]);
  }
  require(!rows.empty(), ErrorCode::kNoUsableRows, "no usable rows in " + path.string());
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      out.covariates(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const std::string& response_name) {
  for (std::size_t j = 0; j < data.cols(); ++j) {
    out << (j < data.feature_names.size() ? data.feature_names[j] : "x" + std::to_string(j + 1))
        << ',';
  }
  out << response_name << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      out << format_double(data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << ',';
    }
    out << format_double(data.responses[i]) << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& response_name) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIoError, "cannot write " + path.string());
  write_dataset_csv(out, data, response_name);
}

}  // namespace condquant
