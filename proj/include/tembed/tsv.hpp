#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tembed {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Fixed-point with the given number of decimals (presentation only).
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view text);

std::vector<std::string_view> split_tabs(std::string_view line);

/// Writes text to a file in binary mode so LF line endings are preserved.
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

/// Splits on '\n'; a trailing newline does not produce an empty final line.
std::vector<std::string_view> split_lines(std::string_view text);

} // namespace tembed
