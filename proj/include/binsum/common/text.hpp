#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace binsum {

std::string read_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> split(std::string_view s, char sep);

// "0x" followed by lowercase hex digits, no padding.
std::string hex_address(std::uint64_t value);
// Accepts "0x1f", "0X1F" and bare "1f". Throws ParseError otherwise.
std::uint64_t parse_hex_address(std::string_view text);

bool is_identifier(std::string_view s);

}  // namespace binsum

namespace binsum {

// Replaces every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view s);

}  // namespace binsum
