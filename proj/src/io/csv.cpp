#include "botuq/io/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "botuq/errors.hpp"

namespace botuq::io {

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    table.rows.push_back(std::move(row));
    row.clear();
    row_started = false;
  };
  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
      row_started = true;
    } else if (c == ',') {
      end_field();
      row_started = true;
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      // swallow; \r\n ends the row at the \n
      if (i + 1 >= n || text[i + 1] != '\n') end_row();
    } else {
      field.push_back(c);
      row_started = true;
    }
    ++i;
  }
  if (in_quotes) throw ValidationError("parse_csv: unterminated quoted field");
  if (row_started || !field.empty() || !row.empty()) end_row();
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("read_csv: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string csv_escape(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("write_csv: cannot open '" + path + "' for writing");
  auto write_row = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(r[i]);
    }
    out << '\n';
  };
  if (!header.empty()) write_row(header);
  for (const auto& r : rows) write_row(r);
  if (!out) throw ValidationError("write_csv: write to '" + path + "' failed");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that still round trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    double back;
    if (std::sscanf(shorter, "%lf", &back) == 1 && back == v) return shorter;
  }
  return buf;
}

}  // namespace botuq::io
