#pragma once

#include <string>
#include <string_view>

namespace nullaudit {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's raw bytes. Throws IoError.
std::string sha256_file(const std::string& path);

}  // namespace nullaudit
