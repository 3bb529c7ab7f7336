#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace crisisvit {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Short form used in file names and version tags (first 16 hex digits).
inline std::string short_digest(std::string_view bytes) { return sha256_hex(bytes).substr(0, 16); }

}  // namespace crisisvit
