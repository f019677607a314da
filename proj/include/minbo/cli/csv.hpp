#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace minbo::cli {

/// A parsed CSV file: header plus string cells. Quoted fields with embedded
/// commas, quotes and newlines are supported.
struct CsvTable {
  std::string source;  // file name for error messages
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; ParseError naming the file when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  /// Cell as a finite double; ParseError with row/column location otherwise.
  /// Rows are numbered from 2 (the header is line 1).
  double number(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(std::string_view text, std::string source = "<memory>");
CsvTable read_csv(const std::string& path);

/// %.17g, so every double reads back to the same bits.
std::string format_number(double v);
/// %.4g for human tables.
std::string format_short(double v);
/// Quotes a field when needed.
std::string csv_field(std::string_view s);

std::string read_file(const std::string& path);
/// Writes to a temporary sibling, then renames over `path`.
void write_file(const std::string& path, std::string_view content);

}  // namespace minbo::cli
