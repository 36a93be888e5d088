#include "tsvc/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsvc/errors.hpp"

namespace tsvc {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string text = trim(cell);
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw InvalidInput("cannot parse value '" + cell + "' at row " + std::to_string(row) +
                       ", column '" + column + "'");
  }
  return value;
}

}  // namespace

CsvTable read_csv_table(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw InvalidInput("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(file, line)) throw InvalidInput("'" + path + "' is empty");
  for (const std::string& name : split_line(line)) {
    if (name.empty()) throw InvalidInput("'" + path + "' has an unnamed header column");
    table.header.push_back(name);
  }
  std::size_t row = 1;
  while (std::getline(file, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw InvalidInput("row " + std::to_string(row) + " of '" + path + "' has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(table.header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      values[c] = parse_cell(cells[c], row, table.header[c]);
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

Dataset load_csv(const std::string& path, const CsvLoadSpec& spec) {
  const CsvTable table = read_csv_table(path);
  const auto find = [&](const std::string& name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      throw InvalidInput("'" + path + "' has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t outcome_col = find(spec.outcome_column);
  for (const std::string& name : spec.ordinal_columns) find(name);
  for (const std::string& name : spec.drop_columns) find(name);

  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == outcome_col) continue;
    if (std::find(spec.drop_columns.begin(), spec.drop_columns.end(), table.header[c]) !=
        spec.drop_columns.end()) {
      continue;
    }
    keep.push_back(c);
  }
  if (keep.empty()) throw InvalidInput("'" + path + "' has no covariate columns");
  if (table.rows.size() < 2) throw InvalidInput("'" + path + "' needs at least 2 data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(keep.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = table.rows[static_cast<std::size_t>(i)][outcome_col];
    for (std::size_t c = 0; c < keep.size(); ++c) {
      x(i, static_cast<Eigen::Index>(c)) = table.rows[static_cast<std::size_t>(i)][keep[c]];
    }
  }

  std::vector<ColumnMeta> columns;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    ColumnMeta meta;
    meta.name = table.header[keep[c]];
    const bool ordinal =
        std::find(spec.ordinal_columns.begin(), spec.ordinal_columns.end(), meta.name) !=
        spec.ordinal_columns.end();
    if (ordinal) {
      meta.kind = ColumnKind::ordinal;
    } else {
      bool binary = true;
      for (Eigen::Index i = 0; i < n && binary; ++i) {
        const double v = x(i, static_cast<Eigen::Index>(c));
        binary = (v == 0.0 || v == 1.0);
      }
      meta.kind = binary ? ColumnKind::binary : ColumnKind::continuous;
    }
    columns.push_back(std::move(meta));
  }
  return Dataset(std::move(y), std::move(x), std::move(columns));
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write '" + tmp + "'");
    file << content;
    if (!file.good()) throw Error("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
  }
}

std::string format_number(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

std::string dataset_to_csv(const Dataset& data, const std::string& outcome_name) {
  std::ostringstream out;
  char buffer[64];
  const auto full = [&](double value) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return std::string(buffer);
  };
  out << outcome_name;
  for (const ColumnMeta& meta : data.columns()) out << "," << meta.name;
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << full(data.outcome()(i));
    for (Eigen::Index j = 0; j < data.p(); ++j) out << "," << full(data.covariates()(i, j));
    out << "\n";
  }
  return out.str();
}

}  // namespace tsvc
