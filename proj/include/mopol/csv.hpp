#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mopol/common.hpp"

namespace mopol::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    fail_validation("missing column '", name, "'");
  }
};

// Splits one line on commas; double-quoted fields may contain commas and
// doubled quotes. Embedded newlines are not supported.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open '", path, "'");
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (trim(line).empty()) continue;
      for (auto& f : split_line(line)) t.header.push_back(trim(f));
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_line(line);
    for (auto& f : fields) f = trim(f);
    if (fields.size() != t.header.size())
      fail_validation(path, ":", line_no, ": expected ", t.header.size(), " fields, found ", fields.size());
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) fail_validation("'", path, "' is empty");
  return t;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && errno != ERANGE && std::isfinite(out);
}

inline bool parse_long(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && ptr == s.data() + s.size()) return true;
  // Accept integral floats such as "1.0".
  double d = 0.0;
  if (parse_double(s, d) && std::floor(d) == d && std::abs(d) < 9e15) {
    out = static_cast<long long>(d);
    return true;
  }
  return false;
}

// Shortest text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Throwing forms; `where` names the cell in the error.
inline double to_double(std::string_view s, std::string_view where) {
  double v = 0.0;
  if (!parse_double(s, v)) fail_validation(where, ": '", s, "' is not a finite number");
  return v;
}

inline long long to_long(std::string_view s, std::string_view where) {
  long long v = 0;
  if (!parse_long(s, v)) fail_validation(where, ": '", s, "' is not an integer");
  return v;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path) {
    if (!out_) fail_validation("cannot write '", path, "'");
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((write_cell(cells, first)), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) out_ << (j ? "," : "") << quote(cells[j]);
    out_ << '\n';
  }

 private:
  template <typename T>
  void write_cell(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      out_ << format_double(static_cast<double>(v));
    } else if constexpr (std::is_convertible_v<T, std::string>) {
      out_ << quote(std::string(v));
    } else {
      out_ << v;
    }
  }

  std::string path_;
  std::ofstream out_;
};

}  // namespace mopol::csv
