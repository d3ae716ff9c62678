#pragma once

// Deterministic CSV formatting and a small reader. All floating-point fields
// go through fixed-precision printf so reruns of the same binary produce
// byte-identical files.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpdoc/core/error.hpp"

namespace cpdoc {

inline std::string fmt_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable csv_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = csv_split(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> row = csv_split(line);
    if (row.size() != t.header.size())
      throw ValidationError("csv: ragged row in " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double csv_num(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw ValidationError("csv: trailing junk in " + where);
    return v;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("csv: non-numeric cell in " + where);
  }
}

}  // namespace cpdoc
