#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tripart {

/// Header plus string cells. Quoted fields follow RFC 4180.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of a column that must exist; throws SchemaError otherwise.
  std::size_t require_column(std::string_view name) const;
  void add_row(std::vector<std::string> row);
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::string& path);
std::string format_csv(const CsvTable& table);

}  // namespace tripart
