#include "core/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"

namespace pmspde::csv {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(trim(field));
  return out;
}

}  // namespace

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

Table Table::parse(std::string_view text, const std::string& source) {
  Table t;
  t.source_ = source;
  size_t line_no = 0;
  size_t pos = 0;
  bool have_header = false;
  // Skip a UTF-8 byte order mark.
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    pos = 3;
  }
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_line(line);
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header_.size()) {
        throw schema_error(source + ": line " + std::to_string(line_no) + ": expected " +
                           std::to_string(t.header_.size()) + " fields, found " +
                           std::to_string(fields.size()));
      }
      t.rows_.push_back(std::move(fields));
      t.lines_.push_back(line_no);
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw schema_error(source + ": missing header row");
  return t;
}

int Table::find(std::string_view name) const {
  for (size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Table::require(std::string_view name) const {
  const int c = find(name);
  if (c < 0) throw schema_error(source_ + ": line 1: missing column '" + std::string(name) + "'");
  return c;
}

bool Table::blank(size_t r, int col) const { return rows_[r][col].empty(); }

double Table::number(size_t r, int col) const {
  const std::string& s = rows_[r][col];
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw schema_error(source_ + ": line " + std::to_string(lines_[r]) + ": column '" +
                       header_[col] + "' is not a number: '" + s + "'");
  }
  return v;
}

long long Table::integer(size_t r, int col) const {
  const std::string& s = rows_[r][col];
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw schema_error(source_ + ": line " + std::to_string(lines_[r]) + ": column '" +
                       header_[col] + "' is not an integer: '" + s + "'");
  }
  return v;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Writer::Writer(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw io_error("cannot write file: " + path.string());
}

Writer& Writer::header(std::initializer_list<std::string_view> names) {
  bool first = true;
  for (auto n : names) put(n, first);
  out_ << '\n';
  return *this;
}

Writer& Writer::header(const std::vector<std::string>& names) {
  bool first = true;
  for (const auto& n : names) put(std::string_view(n), first);
  out_ << '\n';
  return *this;
}

Writer& Writer::cells(const std::vector<std::string>& fields) { return header(fields); }

void Writer::close() {
  out_.close();
  if (!out_) throw io_error("error writing file: " + path_.string());
}

}  // namespace pmspde::csv
