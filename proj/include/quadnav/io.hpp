#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace quadnav {

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Strict full-string parse; throws std::runtime_error naming the text.
double parse_double(const std::string& text);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Comma-separated table with a header row. Lines starting with '#' are
// comments and are kept separately.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(const std::string& text);

}  // namespace quadnav
