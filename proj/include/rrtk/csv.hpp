#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rrtk/errors.hpp"

namespace rrtk {

using CsvRow = std::vector<std::string>;

// Minimal CSV: comma-separated, no quoting (fields here are identifiers and
// numbers).
inline std::string csv_join(const CsvRow& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i)
      out += ',';
    out += row[i];
  }
  return out;
}

inline std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw ValidationError("cannot open CSV: " + path);
  std::vector<CsvRow> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty())
      continue;
    CsvRow row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
      row.push_back(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

} // namespace rrtk
