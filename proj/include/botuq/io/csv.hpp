#pragma once

#include <string>
#include <vector>

namespace botuq::io {

// Parsed CSV: rows of string fields.  Quoted fields may contain commas,
// doubled quotes, and newlines.  No header handling here; callers interpret
// row 0 themselves.
struct CsvTable {
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

// Quotes a field only when it needs it.
std::string csv_escape(const std::string& field);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Formats a double with enough digits to round trip exactly.
std::string format_double(double v);

}  // namespace botuq::io
