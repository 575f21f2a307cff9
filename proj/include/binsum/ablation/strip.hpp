#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "binsum/common/error.hpp"

namespace binsum::ablation {

// The symbol table names something the code does not contain.
class ConsistencyError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "consistency"; }
};

// A rename that would not change anything.
class NoOpError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "noop"; }
};

struct SymbolTable {
    std::map<std::string, std::uint64_t> function_names;  // original -> address
    std::vector<std::string> variable_names;              // first-occurrence order; index i -> Var_i
    std::vector<std::string> type_names;
};

enum class StripKind { func_names, var_names, types, all };

StripKind parse_strip_kind(std::string_view text);  // func|var|type|all (and the enum spellings)
std::string_view to_string(StripKind kind);

std::string function_placeholder(std::uint64_t address);  // FUN_0000ea01
std::string variable_placeholder(std::size_t index);      // Var_3
inline constexpr std::string_view kUndefinedType = "undefined";

// Replaces whole identifiers outside string and character literals; comments
// and preprocessor lines are rewritten word by word so no original name
// survives. Throws ConsistencyError when a table entry occurs in the code
// neither as itself nor as its replacement (so stripping twice is a no-op),
// or when present variables are out of first-occurrence order.
std::string strip(std::string_view code, const SymbolTable& table, StripKind kind);

// Whole-identifier rename with the same literal rules as strip. Throws
// NoOpError when `old_name` never occurs; old == new returns the input.
std::string rename_function(std::string_view code, std::string_view old_name, std::string_view new_name);

// Identifier occurrences outside literals, in order (comments and directives
// included, word by word).
std::vector<std::string> identifier_occurrences(std::string_view code);

// Heuristic table for C-like decompiler output: `function_name` at `address`,
// declared variables and parameters in first-occurrence order, and type
// names (C base types, struct/union/enum tags, *_t names, Ghidra's
// undefinedN/uint/ulong family). `void` is left alone.
SymbolTable infer_symbol_table(std::string_view code, std::string_view function_name, std::uint64_t address);

}  // namespace binsum::ablation
