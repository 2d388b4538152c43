#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace spinsq {

/// Shortest-round-trip is not enough for diffing runs; numbers are always
/// written with 17 significant digits ("nan", "inf" for non-finite values).
std::string format_double(double value);

using CsvCell = std::variant<double, std::int64_t, std::string>;

struct CsvTable {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<CsvCell>> rows;

  void add_row(std::vector<CsvCell> row);
  std::string to_string() const;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace spinsq
