#ifndef TSVC_CSV_HPP
#define TSVC_CSV_HPP

#include <string>
#include <vector>

#include "tsvc/dataset.hpp"

namespace tsvc {

struct CsvLoadSpec {
  std::string outcome_column;
  std::vector<std::string> ordinal_columns;
  std::vector<std::string> drop_columns;
};

/// Parses a comma-separated file (header row, '.' decimal, UTF-8) into a
/// Dataset. Column kinds are inferred: values within {0,1} mean binary,
/// anything else continuous; declared ordinal columns stay ordinal.
/// Malformed cells and missing values raise with the row and column named.
Dataset load_csv(const std::string& path, const CsvLoadSpec& spec);

/// Plain numeric table as parsed from a CSV (used before expansion steps).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv_table(const std::string& path);

/// Writes `content` to `path` via a temporary file and an atomic rename, so
/// a failed run never leaves a partial output behind.
void write_file_atomic(const std::string& path, const std::string& content);

/// Dataset back to CSV text (outcome column first) at full round-trip
/// precision.
std::string dataset_to_csv(const Dataset& data, const std::string& outcome_name);

/// Decimal with 6 significant digits (human-facing CSV precision).
std::string format_number(double value);

}  // namespace tsvc

#endif
