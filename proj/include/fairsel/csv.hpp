#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairsel {

/// A parsed CSV file: header plus string cells. `line_numbers[i]` is the
/// 1-based physical line on which row i starts (for error messages).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column_index(std::string_view name) const;
};

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF, embedded newlines.
/// Throws DataError on an empty input, an unterminated quote, or a ragged row.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv_file(const std::string& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::string read_text_file(const std::string& path);

}  // namespace fairsel
