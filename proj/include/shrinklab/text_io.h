#ifndef SHRINKLAB_TEXT_IO_H_
#define SHRINKLAB_TEXT_IO_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace shrinklab {

// All artifacts print reals with 9 significant digits.
inline constexpr int kTextDigits = 9;

std::string format_real(double value);

// Rounds through the 9-digit text representation.
double round_to_text(double value);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::string read_file(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  // Column index by name, -1 if absent.
  int column(std::string_view name) const;
};

// Comma-separated, no quoting. Throws FormatError naming the line on ragged
// rows.
CsvTable parse_csv(std::string_view text);

// Parses a real cell; throws FormatError with `line` on garbage.
double parse_real(const std::string& cell, int line);
long long parse_integer(const std::string& cell, int line);

}  // namespace shrinklab

#endif  // SHRINKLAB_TEXT_IO_H_
