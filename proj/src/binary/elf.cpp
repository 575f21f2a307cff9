#include "binsum/binary/elf.hpp"

#include <elf.h>
#include <zlib.h>

#include <algorithm>

#include <fmt/format.h>

#include "binsum/binary/byte_reader.hpp"

namespace binsum::binary {

bool Section::executable() const { return (flags & SHF_EXECINSTR) != 0; }
bool Section::has_file_data() const { return type != SHT_NOBITS; }

bool looks_like_elf(std::span<const std::uint8_t> image) {
    return image.size() >= EI_NIDENT && image[EI_MAG0] == ELFMAG0 && image[EI_MAG1] == ELFMAG1 &&
           image[EI_MAG2] == ELFMAG2 && image[EI_MAG3] == ELFMAG3;
}

ElfFile::ElfFile(std::span<const std::uint8_t> image) : image_(image) {
    if (!looks_like_elf(image)) throw FormatError("not an ELF file");
    auto cls = image[EI_CLASS];
    auto data = image[EI_DATA];
    if (cls != ELFCLASS32 && cls != ELFCLASS64) throw FormatError("unknown ELF class");
    if (data != ELFDATA2LSB && data != ELFDATA2MSB) throw FormatError("unknown ELF data encoding");
    is_64_ = cls == ELFCLASS64;
    big_endian_ = data == ELFDATA2MSB;

    try {
        ByteReader r(image, big_endian_, "ELF header");
        r.seek(EI_NIDENT);
        type_ = r.u16();
        machine_ = r.u16();
        r.u32();  // e_version
        std::uint64_t shoff;
        if (is_64_) {
            r.u64();  // e_entry
            r.u64();  // e_phoff
            shoff = r.u64();
        } else {
            r.u32();
            r.u32();
            shoff = r.u32();
        }
        r.u32();  // e_flags
        r.u16();  // e_ehsize
        r.u16();  // e_phentsize
        r.u16();  // e_phnum
        auto shentsize = r.u16();
        std::uint64_t shnum = r.u16();
        std::uint64_t shstrndx = r.u16();
        if (shoff == 0) return;  // no section headers
        if (shentsize < (is_64_ ? sizeof(Elf64_Shdr) : sizeof(Elf32_Shdr)))
            throw FormatError("section header entries too small");

        struct Raw {
            std::uint32_t name;
            Section s;
        };
        auto read_header = [&](std::uint64_t index) {
            ByteReader h(image, big_endian_, "section header table");
            h.seek(shoff + index * shentsize);
            Raw raw;
            raw.name = h.u32();
            raw.s.type = h.u32();
            if (is_64_) {
                raw.s.flags = h.u64();
                raw.s.addr = h.u64();
                raw.s.offset = h.u64();
                raw.s.size = h.u64();
            } else {
                raw.s.flags = h.u32();
                raw.s.addr = h.u32();
                raw.s.offset = h.u32();
                raw.s.size = h.u32();
            }
            auto link = h.u32();
            if (index == 0 && shnum == 0) shnum = raw.s.size;           // extended numbering
            if (index == 0 && shstrndx == SHN_XINDEX) shstrndx = link;
            return raw;
        };
        read_header(0);
        if (shnum > 65535 * 16) throw FormatError("implausible section count");

        std::vector<Raw> raws;
        raws.reserve(shnum);
        for (std::uint64_t i = 0; i < shnum; ++i) raws.push_back(read_header(i));
        if (shstrndx >= raws.size()) throw FormatError("section name table index out of range");
        const auto& strtab = raws[shstrndx].s;
        if (strtab.offset + strtab.size > image.size()) throw FormatError("section name table out of bounds");
        for (auto& raw : raws) {
            if (raw.name < strtab.size) {
                ByteReader n(image.subspan(strtab.offset, strtab.size), big_endian_, "section name");
                n.seek(raw.name);
                raw.s.name = std::string(n.cstr());
            }
            if (raw.s.type != SHT_NOBITS && raw.s.type != SHT_NULL &&
                (raw.s.offset > image.size() || raw.s.size > image.size() - raw.s.offset))
                throw FormatError(fmt::format("section '{}' extends past end of file", raw.s.name));
            sections_.push_back(std::move(raw.s));
        }
    } catch (const ParseError& e) {
        throw FormatError(e.what());
    }
}

model::Arch ElfFile::arch() const {
    switch (machine_) {
        case EM_386: return model::Arch::x86;
        case EM_X86_64: return model::Arch::x64;
        case EM_ARM:
        case EM_AARCH64: return model::Arch::arm;
        case EM_MIPS:
        case EM_MIPS_RS3_LE: return model::Arch::mips;
        default: throw FormatError(fmt::format("unsupported ELF machine {}", machine_));
    }
}

const Section* ElfFile::find_section(std::string_view name) const {
    auto it = std::find_if(sections_.begin(), sections_.end(), [&](const Section& s) { return s.name == name; });
    return it == sections_.end() ? nullptr : &*it;
}

std::span<const std::uint8_t> ElfFile::raw_contents(const Section& s) const {
    if (!s.has_file_data()) return {};
    return image_.subspan(s.offset, s.size);
}

std::vector<std::uint8_t> ElfFile::contents(const Section& s) const {
    auto raw = raw_contents(s);
    if (!(s.flags & SHF_COMPRESSED)) return {raw.begin(), raw.end()};
    ByteReader r(raw, big_endian_, "compressed section header");
    std::uint32_t ch_type;
    std::uint64_t ch_size;
    if (is_64_) {
        ch_type = r.u32();
        r.u32();  // ch_reserved
        ch_size = r.u64();
        r.u64();  // ch_addralign
    } else {
        ch_type = r.u32();
        ch_size = r.u32();
        r.u32();
    }
    if (ch_type != ELFCOMPRESS_ZLIB)
        throw FormatError(fmt::format("section '{}': unsupported compression type {}", s.name, ch_type));
    std::vector<std::uint8_t> out(ch_size);
    auto dest_len = static_cast<uLongf>(ch_size);
    auto payload = raw.subspan(r.pos());
    if (uncompress(out.data(), &dest_len, payload.data(), static_cast<uLong>(payload.size())) != Z_OK ||
        dest_len != ch_size)
        throw FormatError(fmt::format("section '{}': corrupt zlib payload", s.name));
    return out;
}

const Section* ElfFile::executable_section_for(std::uint64_t lo, std::uint64_t hi) const {
    for (const auto& s : sections_)
        if (s.executable() && s.type != SHT_NULL && s.contains(lo, hi)) return &s;
    return nullptr;
}

}  // namespace binsum::binary
