#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "binsum/common/error.hpp"

namespace binsum::binary {

// Bounds-checked cursor over a byte span. Reading past the end throws
// ParseError with `what_` as context.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, bool big_endian, std::string_view what = "section")
        : data_(data), big_endian_(big_endian), what_(what) {}

    [[nodiscard]] std::size_t pos() const { return pos_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool at_end() const { return pos_ >= data_.size(); }
    [[nodiscard]] std::size_t remaining() const { return pos_ < data_.size() ? data_.size() - pos_ : 0; }
    void seek(std::size_t pos) {
        if (pos > data_.size()) fail();
        pos_ = pos;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(uint_n(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_n(4)); }
    std::uint64_t u64() { return uint_n(8); }

    std::uint64_t uint_n(std::size_t n) {
        need(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            auto b = static_cast<std::uint64_t>(data_[pos_ + (big_endian_ ? i : n - 1 - i)]);
            v = (v << 8) | b;
        }
        pos_ += n;
        return v;
    }

    std::uint64_t uleb128() {
        std::uint64_t result = 0;
        unsigned shift = 0;
        while (true) {
            auto b = u8();
            if (shift < 64) result |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            shift += 7;
            if (!(b & 0x80)) return result;
        }
    }

    std::int64_t sleb128() {
        std::int64_t result = 0;
        unsigned shift = 0;
        std::uint8_t b;
        do {
            b = u8();
            if (shift < 64) result |= static_cast<std::int64_t>(static_cast<std::uint64_t>(b & 0x7f) << shift);
            shift += 7;
        } while (b & 0x80);
        if (shift < 64 && (b & 0x40)) result |= -(static_cast<std::int64_t>(1) << shift);
        return result;
    }

    // NUL-terminated string starting at the cursor.
    std::string_view cstr() {
        auto start = pos_;
        while (true) {
            need(1);
            if (data_[pos_++] == 0) break;
        }
        return {reinterpret_cast<const char*>(data_.data() + start), pos_ - start - 1};
    }

    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

private:
    void need(std::size_t n) const {
        if (n > remaining()) fail();
    }
    [[noreturn]] void fail() const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    bool big_endian_;
    std::string_view what_;
};

inline void ByteReader::fail() const {
    throw ParseError("truncated " + std::string(what_));
}

}  // namespace binsum::binary
