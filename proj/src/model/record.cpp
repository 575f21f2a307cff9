#include "binsum/model/record.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binsum/common/error.hpp"
#include "binsum/common/text.hpp"

namespace binsum::model {

namespace {

constexpr std::array<std::string_view, 4> kArchNames = {"x86", "x64", "arm", "mips"};
constexpr std::array<std::string_view, 4> kOptNames = {"O0", "O1", "O2", "O3"};
constexpr std::array<std::string_view, 7> kRepNames = {
    "raw_bytes", "assembly", "ir", "decompiled_ghidra", "decompiled_hexrays", "decompiled_angr", "source",
};

constexpr std::array<std::string_view, 11> kRecordKeys = {
    "id", "project", "binary_path", "arch", "opt", "stripped", "name", "low_pc", "high_pc", "comment", "reps",
};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<Enum>(i);
    throw ValidationError(fmt::format("unknown {} '{}'", what, s));
}

const nlohmann::json& require(const nlohmann::json& obj, std::string_view key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(fmt::format("missing field '{}'", key), line_no);
    return *it;
}

std::string require_string(const nlohmann::json& obj, std::string_view key, std::size_t line_no) {
    const auto& v = require(obj, key, line_no);
    if (!v.is_string()) throw ParseError(fmt::format("field '{}' must be a string", key), line_no);
    return v.get<std::string>();
}

}  // namespace

std::string_view to_string(Arch a) { return kArchNames.at(static_cast<std::size_t>(a)); }
std::string_view to_string(OptLevel o) { return kOptNames.at(static_cast<std::size_t>(o)); }
std::string_view to_string(RepKind k) { return kRepNames.at(static_cast<std::size_t>(k)); }

Arch parse_arch(std::string_view s) { return parse_enum<Arch>(s, kArchNames, "architecture"); }
OptLevel parse_opt_level(std::string_view s) { return parse_enum<OptLevel>(s, kOptNames, "optimization level"); }
RepKind parse_rep_kind(std::string_view s) { return parse_enum<RepKind>(s, kRepNames, "representation kind"); }

std::optional<RepKind> try_parse_rep_kind(std::string_view s) {
    for (std::size_t i = 0; i < kRepNames.size(); ++i)
        if (kRepNames[i] == s) return static_cast<RepKind>(i);
    return std::nullopt;
}

bool is_decompiled(RepKind k) {
    return k == RepKind::decompiled_ghidra || k == RepKind::decompiled_hexrays || k == RepKind::decompiled_angr;
}

void validate(const FunctionRecord& r) {
    if (r.id.empty()) throw ValidationError("record id is empty");
    if (r.low_pc >= r.high_pc)
        throw ValidationError(fmt::format("record {}: low_pc {} must be below high_pc {}", r.id,
                                          hex_address(r.low_pc), hex_address(r.high_pc)));
    if (r.name.empty() && !r.stripped) throw ValidationError(fmt::format("record {}: empty function name", r.id));
    if (r.comment.empty()) throw ValidationError(fmt::format("record {}: empty comment", r.id));
    for (const auto& [kind, text] : r.reps)
        if (text.empty())
            throw ValidationError(fmt::format("record {}: empty payload for rep '{}'", r.id, to_string(kind)));
}

std::string encode_record(const FunctionRecord& r) {
    validate(r);
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["project"] = r.project;
    j["binary_path"] = r.binary_path;
    j["arch"] = to_string(r.arch);
    j["opt"] = to_string(r.opt_level);
    j["stripped"] = r.stripped;
    j["name"] = r.name;
    j["low_pc"] = hex_address(r.low_pc);
    j["high_pc"] = hex_address(r.high_pc);
    j["comment"] = r.comment;
    auto reps = nlohmann::ordered_json::object();
    for (const auto& [kind, text] : r.reps) reps[std::string(to_string(kind))] = text;
    j["reps"] = std::move(reps);
    try {
        return j.dump();
    } catch (const nlohmann::json::type_error& e) {
        throw ValidationError(fmt::format("record {}: not valid UTF-8 ({})", r.id, e.what()));
    }
}

FunctionRecord decode_record(std::string_view line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(fmt::format("malformed record: {}", e.what()), line_no);
    }
    if (!j.is_object()) throw ParseError("record must be a JSON object", line_no);
    for (const auto& [key, _] : j.items())
        if (std::find(kRecordKeys.begin(), kRecordKeys.end(), key) == kRecordKeys.end())
            throw ValidationError(fmt::format("line {}: unknown record field '{}'", line_no, key));

    FunctionRecord r;
    r.id = require_string(j, "id", line_no);
    r.project = require_string(j, "project", line_no);
    r.binary_path = require_string(j, "binary_path", line_no);
    r.arch = parse_arch(require_string(j, "arch", line_no));
    r.opt_level = parse_opt_level(require_string(j, "opt", line_no));
    const auto& stripped = require(j, "stripped", line_no);
    if (!stripped.is_boolean()) throw ParseError("field 'stripped' must be a boolean", line_no);
    r.stripped = stripped.get<bool>();
    r.name = require_string(j, "name", line_no);
    try {
        r.low_pc = parse_hex_address(require_string(j, "low_pc", line_no));
        r.high_pc = parse_hex_address(require_string(j, "high_pc", line_no));
    } catch (const ParseError& e) {
        throw ParseError(e.what(), line_no);
    }
    r.comment = require_string(j, "comment", line_no);
    const auto& reps = require(j, "reps", line_no);
    if (!reps.is_object()) throw ParseError("field 'reps' must be an object", line_no);
    for (const auto& [key, value] : reps.items()) {
        auto kind = try_parse_rep_kind(key);
        if (!kind) throw ValidationError(fmt::format("line {}: unknown representation kind '{}'", line_no, key));
        if (!value.is_string()) throw ParseError(fmt::format("rep '{}' must be a string", key), line_no);
        r.reps.emplace(*kind, value.get<std::string>());
    }
    try {
        validate(r);
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("line {}: {}", line_no, e.what()));
    }
    return r;
}

std::vector<FunctionRecord> read_dataset(std::istream& in) {
    std::vector<FunctionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        out.push_back(decode_record(line, line_no));
    }
    return out;
}

std::vector<FunctionRecord> read_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open dataset {}", path));
    return read_dataset(in);
}

void write_dataset(std::ostream& out, const std::vector<FunctionRecord>& records) {
    for (const auto& r : records) out << encode_record(r) << '\n';
}

void write_dataset_file(const std::string& path, const std::vector<FunctionRecord>& records) {
    std::string data;
    for (const auto& r : records) {
        data += encode_record(r);
        data += '\n';
    }
    write_file_atomic(path, data);
}

void validate(const ScoreSet& s) {
    auto check = [](double v, double lo, std::string_view name) {
        if (!(v >= lo && v <= 1.0))
            throw ValidationError(fmt::format("score '{}' = {} outside [{}, 1]", name, v, lo));
    };
    check(s.semantic, -1.0, "semantic");
    check(s.bleu1, 0.0, "bleu1");
    check(s.meteor, 0.0, "meteor");
    check(s.rouge_l, 0.0, "rouge_l");
}

}  // namespace binsum::model
