#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binsum/binary/elf.hpp"

namespace binsum::binary {

struct DwarfSubprogram {
    std::string name;
    std::uint64_t low_pc = 0;
    std::uint64_t high_pc = 0;
    bool non_contiguous = false;  // DW_AT_ranges with more than one range; first range kept
    std::size_t unit = 0;         // index into DwarfInfo::producers
};

struct DwarfInfo {
    std::vector<DwarfSubprogram> subprograms;
    std::vector<std::string> producers;  // DW_AT_producer per compile unit, "" when absent
};

// Walks every compile unit in .debug_info (DWARF 2-5) and returns the
// DW_TAG_subprogram entries that carry a name (directly or through
// DW_AT_abstract_origin / DW_AT_specification) and a pc range. Throws
// ParseError on malformed debug data.
DwarfInfo read_subprograms(const ElfFile& elf);

}  // namespace binsum::binary
