#pragma once

// Comma-separated output with round-trip number formatting, LF line endings,
// optional single header row on input.

#include "zest/types.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace zest::csv {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

/// Reads the last column of a CSV as numbers, so both a bare value column and
/// an (index, value) export are accepted. A non-numeric first row is treated
/// as a header and skipped; any later non-numeric row is an error.
inline std::vector<double> read_column(std::istream& is) {
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view v = trim(line);
    if (v.empty()) continue;
    const auto comma = v.rfind(',');
    const std::string_view cell = comma == std::string_view::npos ? v : v.substr(comma + 1);
    double x;
    if (!parse_double(cell, x)) {
      if (out.empty() && lineno == 1) continue;
      throw Error(ErrorKind::InvalidArgument,
                  "csv: non-numeric value on line " + std::to_string(lineno) + ": '" + std::string(cell) + "'");
    }
    out.push_back(x);
  }
  return out;
}

inline std::vector<double> read_column(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::InvalidArgument, "csv: cannot open '" + path + "'");
  return read_column(is);
}

}  // namespace zest::csv
