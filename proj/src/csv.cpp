#include "spe/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace spe {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ParseError::ParseError(const std::string& f, int r, int c, const std::string& what)
    : std::runtime_error(f + ":" + std::to_string(r) + ":" + std::to_string(c) + ": " + what), file(f), row(r), col(c) {}

int CsvTable::column(const std::string& name) const {
  for (size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<int>(k);
  throw ParseError(path, 0, 0, "missing column '" + name + "'");
}

const std::string& CsvTable::text(int row, int col) const {
  if (col >= static_cast<int>(rows[row].size())) throw ParseError(path, row + 1, col + 1, "missing field");
  return rows[row][col];
}

double CsvTable::number(int row, int col) const {
  const std::string& s = text(row, col);
  if (s == "inf" || s == "+inf" || s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(path, row + 1, col + 1, "not a number: '" + s + "'");
  return v;
}

int CsvTable::integer(int row, int col) const {
  const std::string& s = text(row, col);
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(path, row + 1, col + 1, "not an integer: '" + s + "'");
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, 0, "cannot open file");
  CsvTable t;
  t.path = path;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (!have_header) {
      t.header = split(s);
      have_header = true;
    } else {
      t.rows.push_back(split(s));
    }
  }
  if (!have_header) throw ParseError(path, 0, 0, "empty file");
  return t;
}

struct CsvWriter::Impl {
  std::ofstream out;
  bool first = true;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("cannot write " + path);
  }
  for (const auto& h : header) cell(h);
  end_row();
}

CsvWriter::~CsvWriter() { delete impl_; }

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (!impl_->first) impl_->out << ',';
  impl_->out << s;
  impl_->first = false;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(int v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  impl_->out << '\n';
  impl_->first = true;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace spe
