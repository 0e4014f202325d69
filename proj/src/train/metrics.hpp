#pragma once

// Deterministic CSV output for training curves and probe results. All
// numbers are rendered with "%.9g", so identical runs produce byte-identical
// files (the reproducibility contract is on the bytes, not parsed values).

#include <string>
#include <vector>

#include "core/error.hpp"

namespace spmkd {

std::string format_csv_value(double v);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::size_t columns_ = 0;
  void* file_ = nullptr;  // FILE*
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace spmkd
