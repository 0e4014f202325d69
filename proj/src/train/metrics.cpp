#include "train/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace spmkd {

std::string format_csv_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> columns) : path_(path) {
  if (columns.empty()) throw ConfigError("csv: at least one column required");
  columns_ = columns.size();
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("csv: cannot open '" + path + "' for writing");
  file_ = f;
  std::string header;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) header += ',';
    header += columns[i];
  }
  header += '\n';
  std::fwrite(header.data(), 1, header.size(), f);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(static_cast<FILE*>(file_));
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) {
    throw DimensionError("csv: row width " + std::to_string(values.size()) + " does not match " +
                         std::to_string(columns_) + " columns");
  }
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_csv_value(values[i]);
  }
  line += '\n';
  FILE* f = static_cast<FILE*>(file_);
  std::fwrite(line.data(), 1, line.size(), f);
  std::fflush(f);
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw StateError("csv: no column named '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (line_no == 1) {
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw ParseError("csv: row has " + std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(table.columns.size()), line_no);
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        throw ParseError("csv: cell '" + c + "' is not a number", line_no);
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw ParseError("csv: empty file", 0);
  return table;
}

}  // namespace spmkd
