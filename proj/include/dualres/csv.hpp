#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dualres {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

/// Shortest text that parses back to the identical double.
std::string format_double(double value);
double parse_double(const std::string& text);

std::string write_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
CsvTable load_csv(const std::filesystem::path& path);
void save_csv(const CsvTable& table, const std::filesystem::path& path);

}  // namespace dualres
