#pragma once

#include <string>
#include <string_view>

namespace geolens {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

/// Throws a parse error on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace geolens
