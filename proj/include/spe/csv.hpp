#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spe {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, int row, int col, const std::string& what);
  std::string file;
  int row = 0, col = 0;  // 1-based data row (header is row 0), 1-based column
};

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws ParseError if missing
  double number(int row, int col) const;      // accepts "inf"
  int integer(int row, int col) const;
  const std::string& text(int row, int col) const;
};

/// Comma separated, first line is the header, blank lines and lines starting with '#' skipped.
CsvTable read_csv(const std::string& path);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v);
  CsvWriter& cell(int v);
  CsvWriter& cell(long long v);
  void end_row();

 private:
  struct Impl;
  Impl* impl_;
};

/// Shortest text that parses back to the same double; "inf" for +∞.
std::string format_double(double v);

}  // namespace spe
