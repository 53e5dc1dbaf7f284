#pragma once

#include <string>
#include <string_view>

namespace droid::digest {

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view data);

// SHA-256 of a file's contents, lowercase hex. Throws IoError if unreadable.
std::string sha256_file_hex(const std::string& path);

} // namespace droid::digest
