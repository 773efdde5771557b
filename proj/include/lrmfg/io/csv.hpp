#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lrmfg/core/error.hpp"
#include "lrmfg/graphon/kernel_matrix.hpp"

namespace lrmfg::io {

/// Shortest decimal that round-trips to the same double.
inline std::string format_number(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string format_number(std::size_t v) {
  char buf[24];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Header-first CSV writer. Rows must match the header width.
class CsvWriter {
public:
  CsvWriter(const std::string& path, std::vector<std::string> header) : path_(path), width_(header.size()) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw InvalidArgument("cannot write " + path);
    for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    static_assert(sizeof...(Ts) > 0);
    if (sizeof...(Ts) != width_) throw InvalidArgument(path_ + ": row width does not match header");
    std::size_t k = 0;
    ((out_ << (k++ ? "," : "") << cell(fields)), ...);
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw InvalidArgument("error writing " + path_);
  }

private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(std::size_t v) { return format_number(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }

  std::string path_;
  std::size_t width_;
  std::ofstream out_;
};

/// Whole-file CSV with a header row.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw InvalidArgument(path + ": missing column '" + std::string(name) + "'");
  }

  double number(std::size_t r, std::size_t c) const {
    const auto& s = rows.at(r).at(c);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw InvalidArgument(path + ":" + std::to_string(r + 2) + ": not a number: '" + s + "'");
    return v;
  }

  std::size_t index(std::size_t r, std::size_t c) const {
    const auto& s = rows.at(r).at(c);
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw InvalidArgument(path + ":" + std::to_string(r + 2) + ": not an index: '" + s + "'");
    return v;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  CsvTable t;
  t.path = path;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size())
      throw InvalidArgument(path + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                            " fields");
    t.rows.push_back(std::move(fields));
  }
  return t;
}

/// Long format: i,j,value with all n^2 entries.
inline void write_kernel_matrix_csv(const std::string& path, const KernelMatrix& w) {
  CsvWriter out(path, {"i", "j", "value"});
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) out.row(i, j, w(i, j));
  out.close();
}

inline KernelMatrix read_kernel_matrix_csv(const std::string& path) {
  auto t = read_csv(path);
  auto ci = t.column("i"), cj = t.column("j"), cv = t.column("value");
  auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(t.rows.size()))));
  if (n == 0 || n * n != t.rows.size()) throw InvalidArgument(path + ": expected n^2 rows");
  std::vector<double> v(n * n);
  std::vector<bool> seen(n * n, false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto i = t.index(r, ci), j = t.index(r, cj);
    if (i >= n || j >= n || seen[i * n + j])
      throw InvalidArgument(path + ":" + std::to_string(r + 2) + ": index out of range or repeated");
    seen[i * n + j] = true;
    v[i * n + j] = t.number(r, cv);
  }
  return KernelMatrix(n, std::move(v));
}

}  // namespace lrmfg::io
