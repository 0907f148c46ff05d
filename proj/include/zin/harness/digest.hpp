#pragma once

#include <string>

namespace zin::harness {

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
/// IoError if the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace zin::harness
