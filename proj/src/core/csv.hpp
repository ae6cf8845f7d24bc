#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace pmspde::csv {

// Header-indexed CSV table. Row numbers reported in errors are 1-based file
// lines (the header is line 1).
class Table {
 public:
  static Table read(const std::filesystem::path& path);
  static Table parse(std::string_view text, const std::string& source = "<memory>");

  const std::vector<std::string>& header() const { return header_; }
  size_t num_rows() const { return rows_.size(); }
  const std::vector<std::string>& row(size_t r) const { return rows_[r]; }
  size_t line_of(size_t r) const { return lines_[r]; }
  const std::string& source() const { return source_; }

  // Column index or -1.
  int find(std::string_view name) const;
  // Column index; throws a schema error naming the file when absent.
  int require(std::string_view name) const;

  const std::string& cell(size_t r, int col) const { return rows_[r][col]; }
  // Parses a finite double; throws a schema error with the line number.
  double number(size_t r, int col) const;
  long long integer(size_t r, int col) const;
  bool blank(size_t r, int col) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<size_t> lines_;
};

// Shortest round-trip formatting (17 significant digits).
std::string format_double(double v);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  Writer& header(std::initializer_list<std::string_view> names);
  Writer& header(const std::vector<std::string>& names);
  template <typename... Fields>
  Writer& row(const Fields&... fields) {
    bool first = true;
    ((put(fields, first)), ...);
    out_ << '\n';
    return *this;
  }
  // Pre-formatted fields.
  Writer& cells(const std::vector<std::string>& fields);
  void close();

 private:
  void sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }
  void put(double v, bool& first) {
    sep(first);
    out_ << format_double(v);
  }
  void put(int v, bool& first) {
    sep(first);
    out_ << v;
  }
  void put(long v, bool& first) {
    sep(first);
    out_ << v;
  }
  void put(long long v, bool& first) {
    sep(first);
    out_ << v;
  }
  void put(size_t v, bool& first) {
    sep(first);
    out_ << v;
  }
  void put(std::string_view v, bool& first) {
    sep(first);
    out_ << v;
  }
  void put(const std::string& v, bool& first) { put(std::string_view(v), first); }
  void put(const char* v, bool& first) { put(std::string_view(v), first); }

  std::filesystem::path path_;
  std::ofstream out_;
};

std::string trim(std::string_view s);

}  // namespace pmspde::csv
