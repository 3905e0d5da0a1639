#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sgnn {

/// Whole-file read; throws std::runtime_error if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Write to a sibling temporary and rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
/// Shortest-exact decimal form used in every CSV ("%.17g").
std::string format_double(double v);

}  // namespace sgnn
