#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binsum/binary/elf.hpp"
#include "binsum/comments/extract.hpp"
#include "binsum/common/error.hpp"
#include "binsum/model/record.hpp"

namespace binsum::binary {

// ELF without usable debug information.
class DebugInfoError : public Error {
public:
    enum class Reason { stripped, no_debug_info, malformed };
    DebugInfoError(Reason reason, const std::string& what) : Error(what), reason_(reason) {}
    [[nodiscard]] Reason reason() const noexcept { return reason_; }
    [[nodiscard]] const char* category() const noexcept override {
        return reason_ == Reason::malformed ? "malformed_debug_info" : "no_debug_info";
    }

private:
    Reason reason_;
};

class RangeError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "range"; }
};

class AmbiguityError : public Error {
public:
    AmbiguityError(const std::string& what, std::vector<std::string> keys) : Error(what), keys_(std::move(keys)) {}
    [[nodiscard]] const std::vector<std::string>& keys() const noexcept { return keys_; }
    [[nodiscard]] const char* category() const noexcept override { return "ambiguity"; }

private:
    std::vector<std::string> keys_;
};

struct BinFunc {
    std::string name;
    std::uint64_t low_pc = 0;
    std::uint64_t high_pc = 0;
    std::string binary_path;
    model::Arch arch = model::Arch::x64;
    model::OptLevel opt_level = model::OptLevel::O0;
    bool non_contiguous = false;  // only the first of several ranges is covered

    bool operator==(const BinFunc&) const = default;
};

struct ExtractOptions {
    std::string binary_path;
    // Overrides the level inferred from DW_AT_producer.
    std::optional<model::OptLevel> opt_level;
};

struct ExtractStats {
    std::size_t subprograms = 0;        // named subprograms with a pc range
    std::size_t outside_text = 0;       // dropped: range not inside an executable section
    std::size_t duplicates = 0;         // dropped: same name and range seen in another unit
};

// Function boundaries from DWARF subprogram entries, sorted by (low_pc, name).
std::vector<BinFunc> extract_functions(std::span<const std::uint8_t> binary, const ExtractOptions& options = {},
                                       ExtractStats* stats = nullptr);

// Best-effort optimization level from a compiler producer string
// ("GNU C17 11.4.0 -mtune=generic -O2 -g"); the last -O flag wins.
std::optional<model::OptLevel> opt_level_from_producer(std::string_view producer);

// Lowercase hex bytes of [low_pc, high_pc), space separated.
std::string slice_raw_bytes(std::span<const std::uint8_t> binary, const BinFunc& func);
std::span<const std::uint8_t> function_bytes(const ElfFile& elf, const BinFunc& func);

// Decompiler / IR output for one binary, keyed by symbol name or `0x<lowpc>`.
struct ExternalCodeBundle {
    enum class Tool { ghidra, hexrays, angr, ir };
    Tool tool = Tool::ghidra;
    std::map<std::string, std::string> entries;
};

ExternalCodeBundle::Tool parse_tool(std::string_view name);
std::string_view to_string(ExternalCodeBundle::Tool tool);
model::RepKind rep_kind_for(ExternalCodeBundle::Tool tool);

// Reads `<key>.txt` files from a bundle directory.
ExternalCodeBundle load_bundle(const std::filesystem::path& dir, ExternalCodeBundle::Tool tool);

struct IngestResult {
    // index into the BinFunc list -> code text
    std::map<std::size_t, std::string> attached;
    std::vector<std::string> unresolved;  // bundle keys matching no function
};

// Resolves bundle keys against `funcs`. Throws AmbiguityError when two keys
// land on the same function or one key matches several functions.
IngestResult ingest_external(const ExternalCodeBundle& bundle, const std::vector<BinFunc>& funcs);

struct MatchReport {
    std::size_t matched = 0;
    std::size_t binary_only = 0;
    std::size_t source_only = 0;
    std::vector<std::string> non_contiguous;  // matched names whose ranges were truncated
    // Binary names defined more than once (e.g. file-local statics); only the
    // lowest-address definition is matched.
    std::vector<std::string> duplicate_names;
};

// Exact-name join of a cleaned comment corpus with binary functions, in the
// order of `funcs`. One record per intersecting name.
// Records carry the `source` representation when the corpus has one.
std::vector<model::FunctionRecord> match_source_binary(const std::vector<comments::SourceFunctionComment>& corpus,
                                                       const std::vector<BinFunc>& funcs,
                                                       const std::string& project, MatchReport* report = nullptr);

std::string record_id(const std::string& project, const BinFunc& func);

}  // namespace binsum::binary
