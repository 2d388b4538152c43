#include "spinsq/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spinsq/errors.hpp"

namespace spinsq {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error(ErrorCategory::Io, "failed to format a number");
  return std::string(buf, ptr);
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != columns.size()) {
    throw Error(ErrorCategory::InvalidArgument,
                "CSV row for '" + name + "' has " + std::to_string(row.size()) +
                    " cells, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string CsvTable::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      std::visit(
          [&](const auto& cell) {
            using T = std::decay_t<decltype(cell)>;
            if constexpr (std::is_same_v<T, double>) {
              os << format_double(cell);
            } else {
              os << cell;
            }
          },
          row[i]);
    }
    os << "\n";
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::Io, "failed while writing " + path.string());
}

}  // namespace spinsq
