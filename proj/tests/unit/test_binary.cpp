#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "binsum/binary/disasm.hpp"
#include "binsum/binary/dwarf.hpp"
#include "binsum/binary/extract.hpp"
#include "binsum/comments/extract.hpp"
#include "binsum/common/random.hpp"
#include "binsum/common/text.hpp"

using namespace binsum;
using namespace binsum::binary;
namespace fs = std::filesystem;

namespace {

const fs::path kElfDir = fs::path(BINSUM_FIXTURE_DIR) / "elf";

std::vector<std::uint8_t> load(const std::string& name) { return read_binary_file(kElfDir / name); }

struct ManifestRow {
    std::string name;
    std::uint64_t low = 0, high = 0;
};

std::vector<ManifestRow> manifest(const std::string& name) {
    std::vector<ManifestRow> rows;
    for (const auto& line : split_lines(read_file(kElfDir / name))) {
        if (line.empty()) continue;
        auto f = split(line, '\t');
        REQUIRE(f.size() == 3);
        rows.push_back({f[0], parse_hex_address(f[1]), parse_hex_address(f[2])});
    }
    return rows;
}

BinFunc func(std::string name, std::uint64_t low, std::uint64_t high) {
    BinFunc f;
    f.name = std::move(name);
    f.low_pc = low;
    f.high_pc = high;
    f.binary_path = "bin/app";
    return f;
}

comments::SourceFunctionComment sfc(std::string name, std::string comment) {
    comments::SourceFunctionComment c;
    c.name = std::move(name);
    c.comment = std::move(comment);
    return c;
}

const BinFunc& by_name(const std::vector<BinFunc>& funcs, const std::string& name) {
    auto it = std::find_if(funcs.begin(), funcs.end(), [&](const BinFunc& f) { return f.name == name; });
    REQUIRE(it != funcs.end());
    return *it;
}

}  // namespace

TEST_CASE("extracted functions match the nm manifest on every fixture") {
    struct Case {
        const char* stem;
        model::Arch arch;
    };
    for (auto [stem, arch] : {Case{"three.x64", model::Arch::x64}, Case{"three.x64.dwarf4z", model::Arch::x64},
                              Case{"three.i386-linux-gnu", model::Arch::x86},
                              Case{"three.aarch64-linux-gnu", model::Arch::arm},
                              Case{"three.arm-linux-gnueabi", model::Arch::arm},
                              Case{"three.mips-linux-gnu", model::Arch::mips}}) {
        CAPTURE(stem);
        auto bytes = load(std::string(stem) + ".elf");
        ExtractStats stats;
        auto funcs = extract_functions(bytes, {std::string(stem) + ".elf", std::nullopt}, &stats);
        auto rows = manifest(std::string(stem) + ".manifest.tsv");
        REQUIRE(funcs.size() == rows.size());
        REQUIRE(funcs.size() == 3);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(funcs[i].name == rows[i].name);
            CHECK(funcs[i].low_pc == rows[i].low);
            CHECK(funcs[i].high_pc == rows[i].high);
            CHECK(funcs[i].arch == arch);
            CHECK(funcs[i].binary_path == std::string(stem) + ".elf");
            CHECK_FALSE(funcs[i].non_contiguous);
        }
        CHECK(stats.subprograms == 3);
        CHECK(stats.outside_text == 0);
    }
}

TEST_CASE("optimization level comes from the producer string unless overridden") {
    auto o1 = extract_functions(load("three.x64.elf"));
    CHECK(o1.front().opt_level == model::OptLevel::O1);
    auto o2 = extract_functions(load("three.x64.dwarf4z.elf"));
    CHECK(o2.front().opt_level == model::OptLevel::O2);
    auto forced = extract_functions(load("three.x64.elf"), {"x", model::OptLevel::O3});
    CHECK(forced.front().opt_level == model::OptLevel::O3);

    CHECK(opt_level_from_producer("GNU C17 11.4.0 -mtune=generic -O2 -g") == model::OptLevel::O2);
    CHECK(opt_level_from_producer("GNU C17 -O3 -O0") == model::OptLevel::O0);
    CHECK(opt_level_from_producer("GNU C17 -Os") == model::OptLevel::O2);
    CHECK(opt_level_from_producer("GNU C17 -Og") == model::OptLevel::O1);
    CHECK(opt_level_from_producer("GNU C17 -O") == model::OptLevel::O1);
    CHECK(opt_level_from_producer("GNU C17 -Ofast") == model::OptLevel::O3);
    CHECK_FALSE(opt_level_from_producer("clang version 14.0.0").has_value());
    CHECK_FALSE(opt_level_from_producer("GNU C17 -Owhatever").has_value());
}

TEST_CASE("extraction is deterministic") {
    auto bytes = load("three.x64.elf");
    CHECK(extract_functions(bytes) == extract_functions(bytes));
}

TEST_CASE("stripped and debug-less binaries report no debug info") {
    try {
        extract_functions(load("three.x64.stripped.elf"));
        FAIL("expected DebugInfoError");
    } catch (const DebugInfoError& e) {
        CHECK(e.reason() == DebugInfoError::Reason::stripped);
        CHECK(std::string(e.what()).find("no debug info") != std::string::npos);
        CHECK(std::string(e.category()) == "no_debug_info");
    }
    try {
        extract_functions(load("three.x64.nodebug.elf"));
        FAIL("expected DebugInfoError");
    } catch (const DebugInfoError& e) {
        CHECK(e.reason() == DebugInfoError::Reason::no_debug_info);
    }
}

TEST_CASE("corrupt debug info is malformed, not stripped") {
    auto bytes = load("three.x64.elf");
    ElfFile elf(bytes);
    const auto* info = elf.find_section(".debug_info");
    REQUIRE(info != nullptr);
    // Unit length larger than the section.
    for (int i = 0; i < 4; ++i) bytes[info->offset + i] = 0x7f;
    try {
        extract_functions(bytes);
        FAIL("expected DebugInfoError");
    } catch (const DebugInfoError& e) {
        CHECK(e.reason() == DebugInfoError::Reason::malformed);
        CHECK(std::string(e.category()) == "malformed_debug_info");
    }

    // Unsupported DWARF version.
    bytes = load("three.x64.elf");
    bytes[info->offset + 4] = 9;
    CHECK_THROWS_AS(extract_functions(bytes), DebugInfoError);
}

TEST_CASE("non-ELF input is a format error") {
    std::string text = "int main(void) { return 0; }\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    CHECK_THROWS_AS(extract_functions(bytes), FormatError);
    CHECK_THROWS_AS(extract_functions(std::vector<std::uint8_t>{}), FormatError);
    std::vector<std::uint8_t> truncated = load("three.x64.elf");
    truncated.resize(40);
    CHECK_THROWS_AS(extract_functions(truncated), FormatError);
}

TEST_CASE("raw byte slices match objdump and have the range length") {
    auto bytes = load("three.x64.elf");
    auto funcs = extract_functions(bytes);
    std::map<std::string, std::string> oracle;
    for (const auto& line : split_lines(read_file(kElfDir / "three.x64.slices.tsv"))) {
        auto f = split(line, '\t');
        if (f.size() == 2) oracle[f[0]] = f[1];
    }
    REQUIRE(oracle.size() == 3);
    for (const auto& f : funcs) {
        CAPTURE(f.name);
        auto hex = slice_raw_bytes(bytes, f);
        CHECK(hex == oracle.at(f.name));
        auto pairs = split(hex, ' ');
        CHECK(pairs.size() == f.high_pc - f.low_pc);
        for (const auto& p : pairs) CHECK(p.size() == 2);
    }
    CHECK(slice_raw_bytes(bytes, by_name(funcs, "nop_hook")) == "c3");
}

TEST_CASE("slices outside any section are range errors") {
    auto bytes = load("three.x64.elf");
    auto funcs = extract_functions(bytes);
    auto f = by_name(funcs, "sum_array");
    ElfFile elf(bytes);
    const auto* text = elf.find_section(".text");
    REQUIRE(text != nullptr);
    f.high_pc = text->addr + text->size + 1;
    CHECK_THROWS_AS(slice_raw_bytes(bytes, f), RangeError);
    f.low_pc = f.high_pc = text->addr;
    CHECK_THROWS_AS(slice_raw_bytes(bytes, f), RangeError);
    CHECK_THROWS_AS(slice_raw_bytes(bytes, func("ghost", 0x10, 0x20)), RangeError);
}

TEST_CASE("llvm disassembly of the ret-only function") {
    LlvmDisassembler llvm;
    if (!llvm.available()) {
        MESSAGE("libLLVM not loadable: " << llvm.load_error());
        return;
    }
    auto bytes = load("three.x64.elf");
    auto funcs = extract_functions(bytes);
    const auto& nop = by_name(funcs, "nop_hook");
    auto r = disassemble_function(llvm, bytes, nop);
    CHECK(r.complete());
    REQUIRE(r.instructions.size() == 1);
    CHECK(r.text == hex_address(nop.low_pc) + ": ret\n");
    // Oracle frozen from the system objdump when the fixture was built.
    auto frozen_text = read_file(kElfDir / "three.x64.nop_hook.objdump.txt");
    auto frozen = trim(frozen_text);
    CHECK(frozen == fmt::format("{:x}:\tret", nop.low_pc));
}

TEST_CASE("disassembly covers the whole range starting at low_pc") {
    LlvmDisassembler llvm;
    if (!llvm.available()) return;
    for (const char* name : {"three.x64.elf", "three.i386-linux-gnu.elf", "three.aarch64-linux-gnu.elf",
                             "three.arm-linux-gnueabi.elf", "three.mips-linux-gnu.elf"}) {
        CAPTURE(name);
        auto bytes = load(name);
        for (const auto& f : extract_functions(bytes)) {
            CAPTURE(f.name);
            auto r = disassemble_function(llvm, bytes, f);
            CHECK(r.complete());
            REQUIRE_FALSE(r.instructions.empty());
            CHECK(r.instructions.front().address == f.low_pc);
            std::uint64_t next = f.low_pc;
            for (const auto& insn : r.instructions) {
                CHECK(insn.address == next);
                next += insn.size;
            }
            CHECK(next == f.high_pc);
            auto lines = split_lines(r.text);
            if (!lines.empty() && lines.back().empty()) lines.pop_back();
            CHECK(lines.size() == r.instructions.size());
            CHECK(lines.front().rfind(hex_address(f.low_pc) + ": ", 0) == 0);
        }
    }
}

TEST_CASE("llvm and objdump agree on x64 instruction boundaries and mnemonics") {
    LlvmDisassembler llvm;
    ObjdumpDisassembler objdump;
    if (!llvm.available() || objdump.capability().empty()) {
        MESSAGE("skipped: needs both libLLVM and objdump");
        return;
    }
    auto bytes = load("three.x64.elf");
    for (const auto& f : extract_functions(bytes)) {
        auto a = disassemble_function(llvm, bytes, f);
        auto b = disassemble_function(objdump, bytes, f);
        REQUIRE(a.instructions.size() == b.instructions.size());
        for (std::size_t i = 0; i < a.instructions.size(); ++i) {
            CHECK(a.instructions[i].address == b.instructions[i].address);
            CHECK(a.instructions[i].size == b.instructions[i].size);
            CHECK(a.instructions[i].mnemonic == b.instructions[i].mnemonic);
        }
    }
}

TEST_CASE("invalid encodings give a partial result and a warning") {
    std::vector<std::uint8_t> code = {0xc3, 0x90, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff};
    std::vector<std::unique_ptr<DisassemblerAdapter>> adapters;
    adapters.push_back(std::make_unique<LlvmDisassembler>());
    adapters.push_back(std::make_unique<ObjdumpDisassembler>());
    for (const auto& a : adapters) {
        if (!a->capability().count(model::Arch::x64)) continue;
        CAPTURE(a->name());
        auto r = a->disassemble(code, 0x1000, model::Arch::x64);
        CHECK(r.instructions.size() == 2);
        REQUIRE(r.failed_at.has_value());
        CHECK(*r.failed_at == 0x1002);
        REQUIRE(r.warnings.size() == 1);
        CHECK(r.warnings[0].find("0x1002") != std::string::npos);
        CHECK(r.text == "0x1000: ret\n0x1001: nop\n");

        std::vector<std::uint8_t> all_ff(16, 0xff);
        auto r2 = a->disassemble(all_ff, 0x2000, model::Arch::x64);
        CHECK(r2.instructions.empty());
        CHECK(r2.failed_at == std::optional<std::uint64_t>(0x2000));
        CHECK_FALSE(r2.warnings.empty());
    }
}

TEST_CASE("unsupported architectures raise capability errors") {
    ObjdumpDisassembler objdump;
    std::vector<std::uint8_t> code = {0x03, 0xe0, 0x00, 0x08};
    CHECK_THROWS_AS(objdump.disassemble(code, 0, model::Arch::mips), CapabilityError);
    LlvmDisassembler missing(std::string("libdefinitely-not-llvm.so"));
    CHECK_FALSE(missing.available());
    CHECK(missing.capability().empty());
    CHECK_THROWS_AS(missing.disassemble(code, 0, model::Arch::x64), CapabilityError);

    auto bytes = load("three.mips-linux-gnu.elf");
    auto funcs = extract_functions(bytes);
    CHECK_THROWS_AS(disassemble_function(objdump, bytes, funcs.front()), CapabilityError);
}

TEST_CASE("bundle keys resolve by name, address and FUN_ label") {
    std::vector<BinFunc> funcs = {func("f", 0x1000, 0x1010), func("g", 0xea01, 0xea40), func("h", 0x2000, 0x2004)};
    ExternalCodeBundle b;
    b.entries = {{"f", "int f(void) { }"}, {"0xea01", "void FUN_0000ea01(void) { }"}, {"missing", "x"},
                 {"0xdead", "y"}};
    auto r = ingest_external(b, funcs);
    CHECK(r.attached.size() == 2);
    CHECK(r.attached.at(0) == "int f(void) { }");
    CHECK(r.attached.at(1) == "void FUN_0000ea01(void) { }");
    CHECK(r.unresolved == std::vector<std::string>{"0xdead", "missing"});

    ExternalCodeBundle fun;
    fun.entries = {{"FUN_0000ea01", "code"}};
    CHECK(ingest_external(fun, funcs).attached.at(1) == "code");

    ExternalCodeBundle one;
    one.entries = {{"f", "code"}};
    auto single = ingest_external(one, {func("f", 1, 2)});
    CHECK(single.attached.size() == 1);
    CHECK(single.unresolved.empty());
}

TEST_CASE("two keys on one function are an ambiguity error listing both") {
    std::vector<BinFunc> funcs = {func("g", 0xea01, 0xea40)};
    ExternalCodeBundle b;
    b.entries = {{"g", "a"}, {"0xea01", "b"}};
    try {
        ingest_external(b, funcs);
        FAIL("expected AmbiguityError");
    } catch (const AmbiguityError& e) {
        auto keys = e.keys();
        std::sort(keys.begin(), keys.end());
        CHECK(keys == std::vector<std::string>{"0xea01", "g"});
        CHECK(std::string(e.what()).find("0xea01") != std::string::npos);
    }
    // A name shared by two functions cannot be attached either.
    ExternalCodeBundle dup;
    dup.entries = {{"s", "code"}};
    CHECK_THROWS_AS(ingest_external(dup, {func("s", 1, 2), func("s", 3, 4)}), AmbiguityError);
}

TEST_CASE("bundles load from a directory of key.txt files") {
    auto dir = fs::temp_directory_path() / "binsum-bundle-test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file_atomic(dir / "add_ints.txt", "int add_ints(int a, int b) { return a + b; }\n");
    write_file_atomic(dir / "0x401004.txt", "void FUN_00401004(void) { return; }\n");
    write_file_atomic(dir / "README", "ignored");
    auto bundle = load_bundle(dir, parse_tool("ghidra"));
    CHECK(bundle.tool == ExternalCodeBundle::Tool::ghidra);
    CHECK(bundle.entries.size() == 2);
    auto funcs = extract_functions(load("three.x64.elf"));
    auto r = ingest_external(bundle, funcs);
    CHECK(r.unresolved.empty());
    CHECK(r.attached.size() == 2);
    CHECK(funcs[r.attached.begin()->first].name == "add_ints");
    CHECK(rep_kind_for(bundle.tool) == model::RepKind::decompiled_ghidra);
    CHECK(rep_kind_for(parse_tool("ir")) == model::RepKind::ir);
    CHECK_THROWS_AS(parse_tool("radare"), ValidationError);
    CHECK_THROWS_AS(load_bundle(dir / "nope", ExternalCodeBundle::Tool::angr), IoError);
    fs::remove_all(dir);
}

TEST_CASE("match_source_binary is a name intersection") {
    MatchReport rep;
    auto recs = match_source_binary({sfc("f", "Does f.")}, {func("f", 1, 2), func("g", 3, 4)}, "p", &rep);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].name == "f");
    CHECK(recs[0].comment == "Does f.");
    CHECK(rep.matched == 1);
    CHECK(rep.binary_only == 1);
    CHECK(rep.source_only == 0);

    CHECK(match_source_binary({sfc("f", "Does f.")}, {}, "p", &rep).empty());
    CHECK(rep.source_only == 1);
}

TEST_CASE("random corpora: record count equals the name-intersection size") {
    SeededRng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<comments::SourceFunctionComment> corpus;
        std::vector<BinFunc> funcs;
        std::set<std::string> cnames, bnames;
        for (int i = 0; i < 12; ++i) {
            auto n = "fn" + std::to_string(rng.below(20));
            if (cnames.insert(n).second) corpus.push_back(sfc(n, "comment for " + n));
        }
        for (int i = 0; i < 10; ++i) {
            auto n = "fn" + std::to_string(rng.below(20));
            if (bnames.insert(n).second) funcs.push_back(func(n, 0x100 * (i + 1), 0x100 * (i + 1) + 8));
        }
        std::set<std::string> expect;
        std::set_intersection(cnames.begin(), cnames.end(), bnames.begin(), bnames.end(),
                              std::inserter(expect, expect.begin()));
        MatchReport rep;
        auto recs = match_source_binary(corpus, funcs, "p", &rep);
        std::set<std::string> got;
        for (const auto& r : recs) {
            got.insert(r.name);
            CHECK(r.comment == "comment for " + r.name);
            CHECK_NOTHROW(model::validate(r));
        }
        CHECK(got == expect);
        CHECK(recs.size() == expect.size());
        CHECK(rep.binary_only == bnames.size() - expect.size());
        CHECK(rep.source_only == cnames.size() - expect.size());
    }
}

TEST_CASE("ten functions with six shared names give six records") {
    std::vector<BinFunc> funcs;
    std::vector<comments::SourceFunctionComment> corpus;
    for (int i = 0; i < 10; ++i) funcs.push_back(func("f" + std::to_string(i), 16 * i + 16, 16 * i + 24));
    for (int i = 4; i < 14; ++i) corpus.push_back(sfc("f" + std::to_string(i), "c"));
    CHECK(match_source_binary(corpus, funcs, "p").size() == 6);
}

TEST_CASE("duplicate binary names match once, at the lowest address") {
    MatchReport rep;
    auto recs = match_source_binary({sfc("s", "c")}, {func("s", 1, 2), func("s", 5, 6)}, "p", &rep);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].low_pc == 1);
    CHECK(rep.duplicate_names == std::vector<std::string>{"s"});
}

TEST_CASE("fixture source and binary join end to end") {
    auto parsed = comments::parse_source_file(kElfDir / "three.c", "three.c");
    auto corpus = comments::clean_corpus(comments::associate(parsed));
    REQUIRE(corpus.size() == 3);
    auto bytes = load("three.x64.elf");
    auto funcs = extract_functions(bytes, {"three.x64.elf", std::nullopt});
    MatchReport rep;
    auto recs = match_source_binary(corpus, funcs, "fixture", &rep);
    REQUIRE(recs.size() == 3);
    CHECK(rep.matched == 3);
    for (const auto& r : recs) {
        CHECK_NOTHROW(model::validate(r));
        CHECK(r.reps.count(model::RepKind::source) == 1);
        CHECK(r.id == "fixture:three.x64.elf:x64-O1:" + r.name);
    }
    CHECK(recs[0].name == "add_ints");
    CHECK(recs[0].comment == "Adds two integers and returns the sum.");
}
