#include "harvest_guard/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "harvest_guard/errors.hpp"

namespace harvest_guard::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto end = comma == std::string_view::npos ? line.size() : comma;
    cells.emplace_back(trim(line.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

Table parse(std::string_view text, std::string source) {
  Table table;
  table.source = std::move(source);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    const auto line = trim(text.substr(pos, end - pos));
    ++line_no;
    if (!line.empty() && line.front() != '#') {
      auto cells = split_line(line);
      if (table.header.empty()) {
        table.header = std::move(cells);
      } else {
        if (cells.size() != table.header.size()) {
          throw ValidationError(table.source + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(table.header.size()) + " fields, got " +
                                std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (table.header.empty()) throw ValidationError(table.source + ": missing CSV header");
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ValidationError(source + ": missing column '" + std::string(name) + "'");
}

double to_double(const std::string& cell, const Table& table, std::size_t row) {
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError(table.source + ": row " + std::to_string(row + 1) + ": '" + cell +
                          "' is not a number");
  }
  return value;
}

long long to_int(const std::string& cell, const Table& table, std::size_t row) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ValidationError(table.source + ": row " + std::to_string(row + 1) + ": '" + cell +
                          "' is not an integer");
  }
  return value;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace harvest_guard::csv
