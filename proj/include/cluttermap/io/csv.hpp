#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cluttermap/core/error.hpp"

namespace cluttermap::io {

// Shortest representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline double parse_double(const std::string& s, const std::string& what,
                           std::size_t line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), "line ", line,
          ": bad ", what, " '", s, "'");
  return v;
}

// Minimal RFC-4180-style CSV. Fields containing commas, quotes, or newlines
// are quoted with doubled inner quotes. Lines end with LF; CR is tolerated on
// input.

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  return out;
}

// Splits one logical CSV record. The record must already be a full line (no
// embedded unquoted newlines); quoted fields may contain commas and quotes.
inline std::vector<std::string> csv_split(const std::string& line,
                                          std::size_t line_number = 0) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  require(!quoted, "line ", line_number, ": unterminated quoted CSV field");
  fields.push_back(cur);
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row
};

inline CsvTable read_csv(const std::string& path,
                         const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  require(in.good(), "cannot open CSV file: ", path);
  CsvTable table;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = csv_split(line, line_number);
    if (table.header.empty()) {
      table.header = fields;
      if (!expected_header.empty())
        require(fields == expected_header, path, " line 1: bad header '", line,
                "'");
      continue;
    }
    require(fields.size() == table.header.size(), path, " line ", line_number,
            ": expected ", table.header.size(), " fields, got ", fields.size());
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_number);
  }
  require(!table.header.empty(), path, ": missing CSV header");
  return table;
}

inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write CSV file: ", tmp);
    out << csv_join(header) << '\n';
    for (const auto& row : rows) out << csv_join(row) << '\n';
    require(out.good(), "short write to ", tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cluttermap::io
