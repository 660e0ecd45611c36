#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace harvest_guard::csv {

/// A parsed CSV file: header names plus string cells. No quoting support;
/// every file this project reads or writes is plain numeric/identifier data.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or throws ValidationError naming the file.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  std::string source;
};

Table read_file(const std::filesystem::path& path);
Table parse(std::string_view text, std::string source = "<memory>");

std::vector<std::string> split_line(std::string_view line);

double to_double(const std::string& cell, const Table& table, std::size_t row);
long long to_int(const std::string& cell, const Table& table, std::size_t row);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace harvest_guard::csv
