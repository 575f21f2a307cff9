#include "binsum/binary/dwarf.hpp"

#include <optional>
#include <unordered_map>

#include <fmt/format.h>

#include "binsum/binary/byte_reader.hpp"

namespace binsum::binary {

namespace {

// DWARF constants used below (DWARF 5 numbering, plus GNU extensions).
enum : std::uint64_t {
    TAG_compile_unit = 0x11,
    TAG_partial_unit = 0x3c,
    TAG_subprogram = 0x2e,

    AT_name = 0x03,
    AT_low_pc = 0x11,
    AT_high_pc = 0x12,
    AT_producer = 0x25,
    AT_abstract_origin = 0x31,
    AT_declaration = 0x3c,
    AT_specification = 0x47,
    AT_ranges = 0x55,
    AT_str_offsets_base = 0x72,
    AT_addr_base = 0x73,
    AT_rnglists_base = 0x74,
    AT_GNU_addr_base = 0x2133,
    AT_GNU_ranges_base = 0x2132,

    FORM_addr = 0x01,
    FORM_block2 = 0x03,
    FORM_block4 = 0x04,
    FORM_data2 = 0x05,
    FORM_data4 = 0x06,
    FORM_data8 = 0x07,
    FORM_string = 0x08,
    FORM_block = 0x09,
    FORM_block1 = 0x0a,
    FORM_data1 = 0x0b,
    FORM_flag = 0x0c,
    FORM_sdata = 0x0d,
    FORM_strp = 0x0e,
    FORM_udata = 0x0f,
    FORM_ref_addr = 0x10,
    FORM_ref1 = 0x11,
    FORM_ref2 = 0x12,
    FORM_ref4 = 0x13,
    FORM_ref8 = 0x14,
    FORM_ref_udata = 0x15,
    FORM_indirect = 0x16,
    FORM_sec_offset = 0x17,
    FORM_exprloc = 0x18,
    FORM_flag_present = 0x19,
    FORM_strx = 0x1a,
    FORM_addrx = 0x1b,
    FORM_ref_sup4 = 0x1c,
    FORM_strp_sup = 0x1d,
    FORM_data16 = 0x1e,
    FORM_line_strp = 0x1f,
    FORM_ref_sig8 = 0x20,
    FORM_implicit_const = 0x21,
    FORM_loclistx = 0x22,
    FORM_rnglistx = 0x23,
    FORM_ref_sup8 = 0x24,
    FORM_strx1 = 0x25,
    FORM_strx2 = 0x26,
    FORM_strx3 = 0x27,
    FORM_strx4 = 0x28,
    FORM_addrx1 = 0x29,
    FORM_addrx2 = 0x2a,
    FORM_addrx3 = 0x2b,
    FORM_addrx4 = 0x2c,
    FORM_GNU_addr_index = 0x1f01,
    FORM_GNU_str_index = 0x1f02,
    FORM_GNU_ref_alt = 0x1f20,
    FORM_GNU_strp_alt = 0x1f21,

    UT_compile = 0x01,
    UT_type = 0x02,
    UT_partial = 0x03,
    UT_skeleton = 0x04,
    UT_split_compile = 0x05,
    UT_split_type = 0x06,

    RLE_end_of_list = 0,
    RLE_base_addressx = 1,
    RLE_startx_endx = 2,
    RLE_startx_length = 3,
    RLE_offset_pair = 4,
    RLE_base_address = 5,
    RLE_start_end = 6,
    RLE_start_length = 7,
};

struct AttrSpec {
    std::uint64_t name;
    std::uint64_t form;
    std::int64_t implicit_const;
};

struct Abbrev {
    std::uint64_t tag;
    bool has_children;
    std::vector<AttrSpec> attrs;
};

using AbbrevTable = std::unordered_map<std::uint64_t, Abbrev>;

AbbrevTable parse_abbrevs(std::span<const std::uint8_t> section, std::uint64_t offset, bool big_endian) {
    ByteReader r(section, big_endian, ".debug_abbrev");
    r.seek(offset);
    AbbrevTable table;
    while (true) {
        auto code = r.uleb128();
        if (code == 0) break;
        Abbrev a;
        a.tag = r.uleb128();
        a.has_children = r.u8() != 0;
        while (true) {
            AttrSpec spec{r.uleb128(), r.uleb128(), 0};
            if (spec.name == 0 && spec.form == 0) break;
            if (spec.form == FORM_implicit_const) spec.implicit_const = r.sleb128();
            a.attrs.push_back(spec);
        }
        table.emplace(code, std::move(a));
    }
    return table;
}

enum class ValueKind { none, address, constant, string, str_offset, line_str_offset, str_index, addr_index,
                       cu_ref, info_ref, sec_offset, rnglist_index, flag };

struct Value {
    ValueKind kind = ValueKind::none;
    std::uint64_t u = 0;
    std::string_view str;
};

// Attributes of one DIE that the extractor cares about, before resolution.
struct RawDie {
    std::uint64_t offset = 0;  // absolute .debug_info offset
    std::uint64_t tag = 0;
    Value name, low_pc, high_pc, ranges, origin, specification, producer;
    bool declaration = false;
};

struct UnitContext {
    std::uint64_t offset = 0;
    std::uint16_t version = 0;
    std::uint8_t addr_size = 0;
    bool dwarf64 = false;
    std::uint64_t str_offsets_base = 0;
    std::uint64_t addr_base = 0;
    std::uint64_t rnglists_base = 0;
    std::optional<std::uint64_t> base_address;
    std::string producer;
};

class DwarfReader {
public:
    explicit DwarfReader(const ElfFile& elf) : elf_(elf), be_(elf.big_endian()) {
        storage_.reserve(8);
        info_ = load(".debug_info");
        abbrev_ = load(".debug_abbrev");
        str_ = load(".debug_str");
        line_str_ = load(".debug_line_str");
        str_offsets_ = load(".debug_str_offsets");
        addr_ = load(".debug_addr");
        rnglists_ = load(".debug_rnglists");
        ranges_ = load(".debug_ranges");
    }

    DwarfInfo run() {
        DwarfInfo out;
        ByteReader r(info_, be_, ".debug_info");
        while (r.remaining() > 0) {
            UnitContext cu;
            cu.offset = r.pos();
            std::uint64_t length = r.u32();
            if (length == 0xffffffff) {
                cu.dwarf64 = true;
                length = r.u64();
            } else if (length >= 0xfffffff0) {
                throw ParseError(fmt::format("reserved unit length at .debug_info+{:#x}", cu.offset));
            }
            auto unit_end = r.pos() + length;
            if (length > r.remaining()) throw ParseError("compile unit extends past .debug_info");
            cu.version = r.u16();
            if (cu.version < 2 || cu.version > 5)
                throw ParseError(fmt::format("unsupported DWARF version {}", cu.version));
            std::uint64_t abbrev_offset;
            std::uint8_t unit_type = UT_compile;
            if (cu.version >= 5) {
                unit_type = r.u8();
                cu.addr_size = r.u8();
                abbrev_offset = offset_value(r, cu);
                if (unit_type == UT_skeleton || unit_type == UT_split_compile) r.u64();
                if (unit_type == UT_type || unit_type == UT_split_type) {
                    r.u64();
                    offset_value(r, cu);
                }
            } else {
                abbrev_offset = offset_value(r, cu);
                cu.addr_size = r.u8();
            }
            if (cu.addr_size != 4 && cu.addr_size != 8 && cu.addr_size != 2)
                throw ParseError(fmt::format("unsupported address size {}", cu.addr_size));
            if (unit_type == UT_type || unit_type == UT_split_type) {
                r.seek(unit_end);
                continue;
            }
            auto& abbrevs = abbrev_table(abbrev_offset);
            parse_unit(r, unit_end, cu, abbrevs);
            out.producers.push_back(cu.producer);
            r.seek(unit_end);
        }
        resolve(out);
        return out;
    }

private:
    std::span<const std::uint8_t> load(std::string_view name) {
        const auto* s = elf_.find_section(name);
        if (!s) return {};
        storage_.push_back(elf_.contents(*s));
        return storage_.back();
    }

    AbbrevTable& abbrev_table(std::uint64_t offset) {
        auto it = abbrev_cache_.find(offset);
        if (it == abbrev_cache_.end()) it = abbrev_cache_.emplace(offset, parse_abbrevs(abbrev_, offset, be_)).first;
        return it->second;
    }

    static std::uint64_t offset_value(ByteReader& r, const UnitContext& cu) {
        return cu.dwarf64 ? r.u64() : r.u32();
    }

    Value read_value(ByteReader& r, const UnitContext& cu, std::uint64_t form, std::int64_t implicit) {
        Value v;
        switch (form) {
            case FORM_addr: return {ValueKind::address, r.uint_n(cu.addr_size), {}};
            case FORM_data1: return {ValueKind::constant, r.u8(), {}};
            case FORM_data2: return {ValueKind::constant, r.u16(), {}};
            case FORM_data4: return {ValueKind::constant, r.u32(), {}};
            case FORM_data8: return {ValueKind::constant, r.u64(), {}};
            case FORM_data16: r.skip(16); return v;
            case FORM_sdata: return {ValueKind::constant, static_cast<std::uint64_t>(r.sleb128()), {}};
            case FORM_udata: return {ValueKind::constant, r.uleb128(), {}};
            case FORM_implicit_const: return {ValueKind::constant, static_cast<std::uint64_t>(implicit), {}};
            case FORM_string: return {ValueKind::string, 0, r.cstr()};
            case FORM_strp: return {ValueKind::str_offset, offset_value(r, cu), {}};
            case FORM_line_strp: return {ValueKind::line_str_offset, offset_value(r, cu), {}};
            case FORM_strp_sup:
            case FORM_GNU_strp_alt: offset_value(r, cu); return v;  // supplementary file not available
            case FORM_strx:
            case FORM_GNU_str_index: return {ValueKind::str_index, r.uleb128(), {}};
            case FORM_strx1: return {ValueKind::str_index, r.u8(), {}};
            case FORM_strx2: return {ValueKind::str_index, r.u16(), {}};
            case FORM_strx3: return {ValueKind::str_index, r.uint_n(3), {}};
            case FORM_strx4: return {ValueKind::str_index, r.u32(), {}};
            case FORM_addrx:
            case FORM_GNU_addr_index: return {ValueKind::addr_index, r.uleb128(), {}};
            case FORM_addrx1: return {ValueKind::addr_index, r.u8(), {}};
            case FORM_addrx2: return {ValueKind::addr_index, r.u16(), {}};
            case FORM_addrx3: return {ValueKind::addr_index, r.uint_n(3), {}};
            case FORM_addrx4: return {ValueKind::addr_index, r.u32(), {}};
            case FORM_ref1: return {ValueKind::cu_ref, r.u8(), {}};
            case FORM_ref2: return {ValueKind::cu_ref, r.u16(), {}};
            case FORM_ref4: return {ValueKind::cu_ref, r.u32(), {}};
            case FORM_ref8: return {ValueKind::cu_ref, r.u64(), {}};
            case FORM_ref_udata: return {ValueKind::cu_ref, r.uleb128(), {}};
            case FORM_ref_addr:
                return {ValueKind::info_ref, cu.version <= 2 ? r.uint_n(cu.addr_size) : offset_value(r, cu), {}};
            case FORM_ref_sig8: r.u64(); return v;
            case FORM_ref_sup4: r.u32(); return v;
            case FORM_ref_sup8: r.u64(); return v;
            case FORM_GNU_ref_alt: offset_value(r, cu); return v;
            case FORM_sec_offset: return {ValueKind::sec_offset, offset_value(r, cu), {}};
            case FORM_rnglistx: return {ValueKind::rnglist_index, r.uleb128(), {}};
            case FORM_loclistx: r.uleb128(); return v;
            case FORM_flag: return {ValueKind::flag, r.u8(), {}};
            case FORM_flag_present: return {ValueKind::flag, 1, {}};
            case FORM_exprloc:
            case FORM_block: r.skip(r.uleb128()); return v;
            case FORM_block1: r.skip(r.u8()); return v;
            case FORM_block2: r.skip(r.u16()); return v;
            case FORM_block4: r.skip(r.u32()); return v;
            case FORM_indirect: {
                auto actual = r.uleb128();
                if (actual == FORM_indirect) throw ParseError("nested DW_FORM_indirect");
                return read_value(r, cu, actual, implicit);
            }
            default: throw ParseError(fmt::format("unknown attribute form {:#x}", form));
        }
    }

    void parse_unit(ByteReader& r, std::uint64_t unit_end, UnitContext& cu, const AbbrevTable& abbrevs) {
        std::vector<RawDie> dies;
        bool first = true;
        Value cu_low, cu_producer, str_base, addr_base, rng_base;
        while (r.pos() < unit_end) {
            auto offset = r.pos();
            auto code = r.uleb128();
            if (code == 0) continue;
            auto it = abbrevs.find(code);
            if (it == abbrevs.end())
                throw ParseError(fmt::format("unknown abbreviation code {} at .debug_info+{:#x}", code, offset));
            const auto& ab = it->second;
            RawDie die;
            die.offset = offset;
            die.tag = ab.tag;
            for (const auto& spec : ab.attrs) {
                auto value = read_value(r, cu, spec.form, spec.implicit_const);
                switch (spec.name) {
                    case AT_name: die.name = value; break;
                    case AT_low_pc: die.low_pc = value; break;
                    case AT_high_pc: die.high_pc = value; break;
                    case AT_ranges: die.ranges = value; break;
                    case AT_abstract_origin: die.origin = value; break;
                    case AT_specification: die.specification = value; break;
                    case AT_declaration: die.declaration = value.u != 0; break;
                    case AT_producer: die.producer = value; break;
                    case AT_str_offsets_base: if (first) str_base = value; break;
                    case AT_addr_base:
                    case AT_GNU_addr_base: if (first) addr_base = value; break;
                    case AT_rnglists_base:
                    case AT_GNU_ranges_base: if (first) rng_base = value; break;
                    default: break;
                }
            }
            if (first) {
                first = false;
                cu.str_offsets_base = str_base.kind != ValueKind::none ? str_base.u : (cu.dwarf64 ? 16 : 8);
                cu.addr_base = addr_base.kind != ValueKind::none ? addr_base.u : 8;
                cu.rnglists_base = rng_base.kind != ValueKind::none ? rng_base.u : (cu.dwarf64 ? 20 : 12);
                if (die.tag == TAG_compile_unit || die.tag == TAG_partial_unit) {
                    if (die.low_pc.kind != ValueKind::none) cu.base_address = address(die.low_pc, cu);
                    if (die.producer.kind != ValueKind::none) cu.producer = std::string(string(die.producer, cu));
                }
            }
            if (die.tag == TAG_subprogram || die.name.kind != ValueKind::none) dies.push_back(std::move(die));
        }
        auto unit_index = unit_count_++;
        for (auto& die : dies) {
            Named named;
            if (die.name.kind != ValueKind::none) named.name = std::string(string(die.name, cu));
            if (auto ref = die.origin.kind != ValueKind::none ? die.origin : die.specification; ref.kind != ValueKind::none)
                named.ref = ref.kind == ValueKind::cu_ref ? cu.offset + ref.u : ref.u;
            names_.emplace(die.offset, named);
            if (die.tag != TAG_subprogram || die.declaration) continue;

            Pending p;
            p.die_offset = die.offset;
            p.unit = unit_index;
            if (die.low_pc.kind != ValueKind::none && die.high_pc.kind != ValueKind::none) {
                p.low = address(die.low_pc, cu);
                bool high_is_address = die.high_pc.kind == ValueKind::address || die.high_pc.kind == ValueKind::addr_index;
                p.high = high_is_address ? address(die.high_pc, cu) : p.low + die.high_pc.u;
            } else if (die.ranges.kind != ValueKind::none) {
                auto ranges = read_ranges(die.ranges, cu);
                if (ranges.empty()) continue;
                p.low = ranges.front().first;
                p.high = ranges.front().second;
                p.non_contiguous = ranges.size() > 1;
            } else {
                continue;
            }
            if (p.low >= p.high) continue;
            pending_.push_back(p);
        }
    }

    std::string_view string(const Value& v, const UnitContext& cu) const {
        auto at = [&](std::span<const std::uint8_t> section, std::uint64_t offset, std::string_view what) {
            ByteReader r(section, be_, what);
            r.seek(offset);
            return r.cstr();
        };
        switch (v.kind) {
            case ValueKind::string: return v.str;
            case ValueKind::str_offset: return at(str_, v.u, ".debug_str");
            case ValueKind::line_str_offset: return at(line_str_, v.u, ".debug_line_str");
            case ValueKind::str_index: {
                ByteReader r(str_offsets_, be_, ".debug_str_offsets");
                auto width = cu.dwarf64 ? 8u : 4u;
                r.seek(cu.str_offsets_base + v.u * width);
                return at(str_, r.uint_n(width), ".debug_str");
            }
            default: return {};
        }
    }

    std::uint64_t address(const Value& v, const UnitContext& cu) const {
        if (v.kind == ValueKind::address) return v.u;
        if (v.kind == ValueKind::addr_index) return indexed_address(v.u, cu);
        throw ParseError("expected an address-class attribute");
    }

    std::uint64_t indexed_address(std::uint64_t index, const UnitContext& cu) const {
        ByteReader r(addr_, be_, ".debug_addr");
        r.seek(cu.addr_base + index * cu.addr_size);
        return r.uint_n(cu.addr_size);
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> read_ranges(const Value& v, const UnitContext& cu) const {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
        auto push = [&](std::uint64_t lo, std::uint64_t hi) {
            if (lo < hi) out.emplace_back(lo, hi);
        };
        if (cu.version < 5) {
            ByteReader r(ranges_, be_, ".debug_ranges");
            r.seek(v.u);
            auto base = cu.base_address.value_or(0);
            auto max = cu.addr_size == 8 ? ~std::uint64_t{0} : (std::uint64_t{1} << (8 * cu.addr_size)) - 1;
            while (true) {
                auto begin = r.uint_n(cu.addr_size);
                auto end = r.uint_n(cu.addr_size);
                if (begin == 0 && end == 0) break;
                if (begin == max) {
                    base = end;
                    continue;
                }
                push(base + begin, base + end);
            }
            return out;
        }
        ByteReader r(rnglists_, be_, ".debug_rnglists");
        std::uint64_t offset = v.u;
        if (v.kind == ValueKind::rnglist_index) {
            auto width = cu.dwarf64 ? 8u : 4u;
            r.seek(cu.rnglists_base + v.u * width);
            offset = cu.rnglists_base + r.uint_n(width);
        }
        r.seek(offset);
        auto base = cu.base_address.value_or(0);
        while (true) {
            auto kind = r.u8();
            switch (kind) {
                case RLE_end_of_list: return out;
                case RLE_base_addressx: base = indexed_address(r.uleb128(), cu); break;
                case RLE_startx_endx: {
                    auto lo = indexed_address(r.uleb128(), cu);
                    push(lo, indexed_address(r.uleb128(), cu));
                    break;
                }
                case RLE_startx_length: {
                    auto lo = indexed_address(r.uleb128(), cu);
                    push(lo, lo + r.uleb128());
                    break;
                }
                case RLE_offset_pair: {
                    auto lo = r.uleb128();
                    push(base + lo, base + r.uleb128());
                    break;
                }
                case RLE_base_address: base = r.uint_n(cu.addr_size); break;
                case RLE_start_end: {
                    auto lo = r.uint_n(cu.addr_size);
                    push(lo, r.uint_n(cu.addr_size));
                    break;
                }
                case RLE_start_length: {
                    auto lo = r.uint_n(cu.addr_size);
                    push(lo, lo + r.uleb128());
                    break;
                }
                default: throw ParseError(fmt::format("unknown range list entry {}", kind));
            }
        }
    }

    // Name lookup through abstract_origin/specification chains, which may
    // cross unit boundaries via DW_FORM_ref_addr.
    std::string resolve_name(std::uint64_t offset) const {
        for (int hops = 0; hops < 8; ++hops) {
            auto it = names_.find(offset);
            if (it == names_.end()) return {};
            if (!it->second.name.empty()) return it->second.name;
            if (!it->second.ref) return {};
            offset = *it->second.ref;
        }
        return {};
    }

    void resolve(DwarfInfo& out) const {
        for (const auto& p : pending_) {
            auto name = resolve_name(p.die_offset);
            if (name.empty()) continue;
            out.subprograms.push_back({std::move(name), p.low, p.high, p.non_contiguous, p.unit});
        }
    }

    struct Named {
        std::string name;
        std::optional<std::uint64_t> ref;
    };
    struct Pending {
        std::uint64_t die_offset = 0;
        std::uint64_t low = 0;
        std::uint64_t high = 0;
        bool non_contiguous = false;
        std::size_t unit = 0;
    };

    const ElfFile& elf_;
    bool be_;
    std::vector<std::vector<std::uint8_t>> storage_;
    std::span<const std::uint8_t> info_, abbrev_, str_, line_str_, str_offsets_, addr_, rnglists_, ranges_;
    std::unordered_map<std::uint64_t, AbbrevTable> abbrev_cache_;
    std::unordered_map<std::uint64_t, Named> names_;
    std::vector<Pending> pending_;
    std::size_t unit_count_ = 0;
};

}  // namespace

DwarfInfo read_subprograms(const ElfFile& elf) { return DwarfReader(elf).run(); }

}  // namespace binsum::binary
