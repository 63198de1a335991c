#pragma once

#include <string>
#include <string_view>

namespace layerpm {

// Lowercase hex SHA-256 of `data` (64 characters).
std::string sha256_hex(std::string_view data);

// True for exactly 64 lowercase hex digits.
bool is_hex64(std::string_view text) noexcept;

} // namespace layerpm
