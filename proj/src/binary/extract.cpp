#include "binsum/binary/extract.hpp"

#include <elf.h>

#include <algorithm>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "binsum/binary/dwarf.hpp"
#include "binsum/common/text.hpp"

namespace binsum::binary {

namespace fs = std::filesystem;

std::optional<model::OptLevel> opt_level_from_producer(std::string_view producer) {
    std::optional<model::OptLevel> level;
    for (const auto& tok : split(producer, ' ')) {
        if (tok.size() < 2 || tok[0] != '-' || tok[1] != 'O') continue;
        auto arg = std::string_view(tok).substr(2);
        if (arg.empty() || arg == "g" || arg == "1") {
            level = model::OptLevel::O1;
        } else if (arg == "0") {
            level = model::OptLevel::O0;
        } else if (arg == "2" || arg == "s" || arg == "z") {
            level = model::OptLevel::O2;
        } else if (arg == "fast" || (arg.size() == 1 && arg[0] >= '3' && arg[0] <= '9')) {
            level = model::OptLevel::O3;
        }
    }
    return level;
}

std::vector<BinFunc> extract_functions(std::span<const std::uint8_t> binary, const ExtractOptions& options,
                                       ExtractStats* stats) {
    ElfFile elf(binary);
    if (elf.type() == ET_REL)
        throw FormatError("relocatable object: link the binary before extracting functions");
    auto arch = elf.arch();

    if (!elf.find_section(".debug_info")) {
        if (!elf.find_section(".symtab"))
            throw DebugInfoError(DebugInfoError::Reason::stripped, "no debug info: binary is stripped");
        throw DebugInfoError(DebugInfoError::Reason::no_debug_info, "no debug info: .debug_info section missing");
    }

    DwarfInfo info;
    try {
        info = read_subprograms(elf);
    } catch (const ParseError& e) {
        throw DebugInfoError(DebugInfoError::Reason::malformed, fmt::format("malformed debug info: {}", e.what()));
    } catch (const FormatError& e) {
        throw DebugInfoError(DebugInfoError::Reason::malformed, fmt::format("malformed debug info: {}", e.what()));
    }

    ExtractStats local;
    std::vector<BinFunc> out;
    std::set<std::tuple<std::uint64_t, std::uint64_t, std::string>> seen;
    for (const auto& sp : info.subprograms) {
        ++local.subprograms;
        if (sp.low_pc >= sp.high_pc || !elf.executable_section_for(sp.low_pc, sp.high_pc)) {
            ++local.outside_text;
            continue;
        }
        if (!seen.emplace(sp.low_pc, sp.high_pc, sp.name).second) {
            ++local.duplicates;
            continue;
        }
        BinFunc f;
        f.name = sp.name;
        f.low_pc = sp.low_pc;
        f.high_pc = sp.high_pc;
        f.binary_path = options.binary_path;
        f.arch = arch;
        if (options.opt_level) {
            f.opt_level = *options.opt_level;
        } else {
            auto inferred = opt_level_from_producer(sp.unit < info.producers.size() ? info.producers[sp.unit] : "");
            f.opt_level = inferred.value_or(model::OptLevel::O0);
        }
        f.non_contiguous = sp.non_contiguous;
        out.push_back(std::move(f));
    }
    std::sort(out.begin(), out.end(), [](const BinFunc& a, const BinFunc& b) {
        return std::tie(a.low_pc, a.name) < std::tie(b.low_pc, b.name);
    });
    if (stats) *stats = local;
    return out;
}

std::span<const std::uint8_t> function_bytes(const ElfFile& elf, const BinFunc& func) {
    if (func.low_pc >= func.high_pc)
        throw RangeError(fmt::format("{}: empty range [{:#x}, {:#x})", func.name, func.low_pc, func.high_pc));
    const Section* sec = nullptr;
    for (const auto& s : elf.sections()) {
        if (s.addr != 0 && s.has_file_data() && s.contains(func.low_pc, func.high_pc)) {
            sec = &s;
            break;
        }
    }
    if (!sec)
        throw RangeError(fmt::format("{}: range [{:#x}, {:#x}) is not inside any file-backed section", func.name,
                                     func.low_pc, func.high_pc));
    auto data = elf.raw_contents(*sec);
    return data.subspan(func.low_pc - sec->addr, func.high_pc - func.low_pc);
}

std::string slice_raw_bytes(std::span<const std::uint8_t> binary, const BinFunc& func) {
    ElfFile elf(binary);
    auto bytes = function_bytes(elf, func);
    std::string out;
    out.reserve(bytes.size() * 3);
    static constexpr char kHex[] = "0123456789abcdef";
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) out.push_back(' ');
        out.push_back(kHex[bytes[i] >> 4]);
        out.push_back(kHex[bytes[i] & 0xf]);
    }
    return out;
}

ExternalCodeBundle::Tool parse_tool(std::string_view name) {
    auto lower = to_lower(name);
    if (lower == "ghidra") return ExternalCodeBundle::Tool::ghidra;
    if (lower == "hexrays" || lower == "hex-rays" || lower == "ida") return ExternalCodeBundle::Tool::hexrays;
    if (lower == "angr") return ExternalCodeBundle::Tool::angr;
    if (lower == "ir" || lower == "microcode") return ExternalCodeBundle::Tool::ir;
    throw ValidationError(fmt::format("unknown external tool '{}' (expected ghidra, hexrays, angr or ir)", name));
}

std::string_view to_string(ExternalCodeBundle::Tool tool) {
    switch (tool) {
        case ExternalCodeBundle::Tool::ghidra: return "ghidra";
        case ExternalCodeBundle::Tool::hexrays: return "hexrays";
        case ExternalCodeBundle::Tool::angr: return "angr";
        case ExternalCodeBundle::Tool::ir: return "ir";
    }
    return "?";
}

model::RepKind rep_kind_for(ExternalCodeBundle::Tool tool) {
    switch (tool) {
        case ExternalCodeBundle::Tool::ghidra: return model::RepKind::decompiled_ghidra;
        case ExternalCodeBundle::Tool::hexrays: return model::RepKind::decompiled_hexrays;
        case ExternalCodeBundle::Tool::angr: return model::RepKind::decompiled_angr;
        case ExternalCodeBundle::Tool::ir: return model::RepKind::ir;
    }
    return model::RepKind::ir;
}

ExternalCodeBundle load_bundle(const fs::path& dir, ExternalCodeBundle::Tool tool) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError(fmt::format("bundle directory '{}' not found", dir.string()));
    ExternalCodeBundle bundle;
    bundle.tool = tool;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        auto key = entry.path().stem().string();
        bundle.entries.emplace(key, read_file(entry.path()));
    }
    return bundle;
}

namespace {

std::optional<std::uint64_t> key_address(const std::string& key) {
    std::string_view digits;
    if (key.size() > 2 && key[0] == '0' && (key[1] == 'x' || key[1] == 'X'))
        digits = std::string_view(key).substr(2);
    else if (key.size() > 4 && key.compare(0, 4, "FUN_") == 0)
        digits = std::string_view(key).substr(4);
    else
        return std::nullopt;
    if (digits.empty() || digits.size() > 16) return std::nullopt;
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); }))
        return std::nullopt;
    return parse_hex_address(digits);
}

}  // namespace

IngestResult ingest_external(const ExternalCodeBundle& bundle, const std::vector<BinFunc>& funcs) {
    std::multimap<std::string, std::size_t> by_name;
    std::multimap<std::uint64_t, std::size_t> by_addr;
    for (std::size_t i = 0; i < funcs.size(); ++i) {
        by_name.emplace(funcs[i].name, i);
        by_addr.emplace(funcs[i].low_pc, i);
    }

    IngestResult result;
    std::map<std::size_t, std::string> claimed_by;  // func index -> key
    for (const auto& [key, code] : bundle.entries) {
        std::vector<std::size_t> hits;
        auto [nb, ne] = by_name.equal_range(key);
        for (auto it = nb; it != ne; ++it) hits.push_back(it->second);
        if (hits.empty()) {
            if (auto addr = key_address(key)) {
                auto [ab, ae] = by_addr.equal_range(*addr);
                for (auto it = ab; it != ae; ++it) hits.push_back(it->second);
            }
        }
        if (hits.empty()) {
            result.unresolved.push_back(key);
            continue;
        }
        if (hits.size() > 1)
            throw AmbiguityError(fmt::format("bundle key '{}' matches {} functions", key, hits.size()), {key});
        auto idx = hits.front();
        auto [it, inserted] = claimed_by.emplace(idx, key);
        if (!inserted)
            throw AmbiguityError(fmt::format("bundle keys '{}' and '{}' both resolve to function {} at {}", it->second,
                                             key, funcs[idx].name, hex_address(funcs[idx].low_pc)),
                                 {it->second, key});
        result.attached.emplace(idx, code);
    }
    return result;
}

std::string record_id(const std::string& project, const BinFunc& func) {
    auto file = fs::path(func.binary_path).filename().string();
    return fmt::format("{}:{}:{}-{}:{}", project, file, model::to_string(func.arch), model::to_string(func.opt_level),
                       func.name);
}

std::vector<model::FunctionRecord> match_source_binary(const std::vector<comments::SourceFunctionComment>& corpus,
                                                       const std::vector<BinFunc>& funcs, const std::string& project,
                                                       MatchReport* report) {
    std::map<std::string, const comments::SourceFunctionComment*> by_name;
    for (const auto& c : corpus) by_name.emplace(c.name, &c);

    MatchReport rep;
    std::set<std::string> matched_names;
    std::vector<model::FunctionRecord> out;
    for (const auto& f : funcs) {
        auto it = by_name.find(f.name);
        if (it == by_name.end()) {
            ++rep.binary_only;
            continue;
        }
        if (matched_names.count(f.name)) {
            rep.duplicate_names.push_back(f.name);
            continue;
        }
        model::FunctionRecord r;
        r.id = record_id(project, f);
        r.project = project;
        r.binary_path = f.binary_path;
        r.arch = f.arch;
        r.opt_level = f.opt_level;
        r.stripped = false;
        r.name = f.name;
        r.low_pc = f.low_pc;
        r.high_pc = f.high_pc;
        r.comment = it->second->comment;
        if (!it->second->source.empty()) r.reps[model::RepKind::source] = it->second->source;
        if (f.non_contiguous) rep.non_contiguous.push_back(f.name);
        matched_names.insert(f.name);
        out.push_back(std::move(r));
    }
    rep.matched = out.size();
    for (const auto& [name, _] : by_name)
        if (!matched_names.count(name)) ++rep.source_only;
    if (report) *report = rep;
    return out;
}

}  // namespace binsum::binary
