#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace binsum {

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace binsum
