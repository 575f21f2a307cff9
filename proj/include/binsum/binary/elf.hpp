#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binsum/common/error.hpp"
#include "binsum/model/record.hpp"

namespace binsum::binary {

// Input is not an ELF image, or its headers are inconsistent.
class FormatError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "format"; }
};

struct Section {
    std::string name;
    std::uint32_t type = 0;
    std::uint64_t flags = 0;
    std::uint64_t addr = 0;
    std::uint64_t offset = 0;
    std::uint64_t size = 0;

    [[nodiscard]] bool executable() const;
    [[nodiscard]] bool has_file_data() const;
    [[nodiscard]] bool contains(std::uint64_t lo, std::uint64_t hi) const { return lo >= addr && hi <= addr + size; }
};

// Read-only view over an ELF image. The byte buffer must outlive the object.
class ElfFile {
public:
    explicit ElfFile(std::span<const std::uint8_t> image);

    [[nodiscard]] bool is_64() const { return is_64_; }
    [[nodiscard]] bool big_endian() const { return big_endian_; }
    [[nodiscard]] std::uint16_t machine() const { return machine_; }
    [[nodiscard]] std::uint16_t type() const { return type_; }
    [[nodiscard]] model::Arch arch() const;
    [[nodiscard]] const std::vector<Section>& sections() const { return sections_; }
    [[nodiscard]] const Section* find_section(std::string_view name) const;
    [[nodiscard]] std::span<const std::uint8_t> image() const { return image_; }

    // Raw file bytes of a section; empty for SHT_NOBITS.
    [[nodiscard]] std::span<const std::uint8_t> raw_contents(const Section& s) const;
    // Section contents with SHF_COMPRESSED (zlib) payloads inflated.
    [[nodiscard]] std::vector<std::uint8_t> contents(const Section& s) const;

    // Executable section that fully contains [lo, hi), if any.
    [[nodiscard]] const Section* executable_section_for(std::uint64_t lo, std::uint64_t hi) const;

private:
    std::span<const std::uint8_t> image_;
    bool is_64_ = false;
    bool big_endian_ = false;
    std::uint16_t machine_ = 0;
    std::uint16_t type_ = 0;
    std::vector<Section> sections_;
};

bool looks_like_elf(std::span<const std::uint8_t> image);

}  // namespace binsum::binary
