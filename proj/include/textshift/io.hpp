#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace textshift {

/// Writes through a sibling temporary file and renames it over `path` once
/// `fill` returns, so readers never observe a partial file. On exception the
/// temporary is removed and `path` is untouched.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill,
                       bool binary = false);

std::string read_file(const std::filesystem::path& path);

/// RFC-4180 field quoting: quotes when the field holds a comma, quote, CR or LF.
std::string csv_field(std::string_view field);

/// Parses one RFC-4180 record (no embedded newlines).
std::vector<std::string> parse_csv_line(std::string_view line);

/// printf-style %g with the given number of significant digits.
std::string format_double(double value, int significant_digits = 12);

}  // namespace textshift
