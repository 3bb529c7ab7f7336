#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace crisisvit {

/// Writes through a sibling temp file and renames it over `path`, creating
/// parent directories. Readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Whole-file read; DataError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace crisisvit
