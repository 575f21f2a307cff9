#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace binsum::model {

enum class Arch { x86, x64, arm, mips };
enum class OptLevel { O0, O1, O2, O3 };

// Textual representations a function can be summarized from. Enumerator order
// is the serialization order.
enum class RepKind {
    raw_bytes,
    assembly,
    ir,
    decompiled_ghidra,
    decompiled_hexrays,
    decompiled_angr,
    source,
};

inline constexpr std::array<RepKind, 7> kAllRepKinds = {
    RepKind::raw_bytes,          RepKind::assembly,        RepKind::ir,     RepKind::decompiled_ghidra,
    RepKind::decompiled_hexrays, RepKind::decompiled_angr, RepKind::source,
};

std::string_view to_string(Arch a);
std::string_view to_string(OptLevel o);
std::string_view to_string(RepKind k);

// Parsers throw ValidationError naming the offending value.
Arch parse_arch(std::string_view s);
OptLevel parse_opt_level(std::string_view s);
RepKind parse_rep_kind(std::string_view s);
std::optional<RepKind> try_parse_rep_kind(std::string_view s);

bool is_decompiled(RepKind k);

// One binary function with its ground-truth comment and code representations.
struct FunctionRecord {
    std::string id;
    std::string project;
    std::string binary_path;
    Arch arch = Arch::x64;
    OptLevel opt_level = OptLevel::O0;
    bool stripped = false;
    std::string name;
    std::uint64_t low_pc = 0;
    std::uint64_t high_pc = 0;
    std::string comment;
    std::map<RepKind, std::string> reps;

    bool operator==(const FunctionRecord&) const = default;
};

// Throws ValidationError describing the first violated invariant.
void validate(const FunctionRecord& record);

// One JSON object, no trailing newline. Keys are emitted in a fixed order so
// identical records always encode to identical bytes.
std::string encode_record(const FunctionRecord& record);

// `line_no` is only used to label errors.
FunctionRecord decode_record(std::string_view line, std::size_t line_no = 0);

std::vector<FunctionRecord> read_dataset(std::istream& in);
std::vector<FunctionRecord> read_dataset_file(const std::string& path);
void write_dataset(std::ostream& out, const std::vector<FunctionRecord>& records);
void write_dataset_file(const std::string& path, const std::vector<FunctionRecord>& records);

struct ScoreSet {
    double semantic = 0.0;
    double bleu1 = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;

    bool operator==(const ScoreSet&) const = default;
};

void validate(const ScoreSet& scores);

struct SummaryPair {
    std::string generated;
    std::string reference;
};

}  // namespace binsum::model
