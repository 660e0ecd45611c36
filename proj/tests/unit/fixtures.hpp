#pragma once

// Test-only helpers. Deliberately independent of the library's own CSV
// reader so fixture values are not filtered through the code under test.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fixtures {

struct PositionRow {
  double xs, ys, zs, xe, ye, ze, dx, dy, dx_w, dy_w;
  std::optional<double> xce, yce, zce, ex, ey;
};

inline std::vector<PositionRow> load_position_table() {
  std::ifstream in(HG_TEST_DATA_DIR "/position_table.csv");
  std::string line;
  std::getline(in, line);
  std::vector<PositionRow> rows;
  while (std::getline(in, line)) {
    std::vector<std::optional<double>> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(cell.empty() ? std::nullopt : std::optional(std::stod(cell)));
    while (v.size() < 15) v.push_back(std::nullopt);
    rows.push_back({*v[0], *v[1], *v[2], *v[3], *v[4], *v[5], *v[6], *v[7], *v[8], *v[9], v[10], v[11], v[12], v[13],
                    v[14]});
  }
  return rows;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace fixtures
