#include "binsum/ablation/strip.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "binsum/common/c_lexer.hpp"
#include "binsum/common/text.hpp"

namespace binsum::ablation {

StripKind parse_strip_kind(std::string_view text) {
    auto t = to_lower(text);
    if (t == "func" || t == "func_names" || t == "function") return StripKind::func_names;
    if (t == "var" || t == "var_names" || t == "variable") return StripKind::var_names;
    if (t == "type" || t == "types") return StripKind::types;
    if (t == "all") return StripKind::all;
    throw ValidationError(fmt::format("unknown strip kind '{}' (expected func, var, type or all)", text));
}

std::string_view to_string(StripKind kind) {
    switch (kind) {
        case StripKind::func_names: return "func";
        case StripKind::var_names: return "var";
        case StripKind::types: return "type";
        case StripKind::all: return "all";
    }
    return "?";
}

std::string function_placeholder(std::uint64_t address) { return fmt::format("FUN_{:08x}", address); }
std::string variable_placeholder(std::size_t index) { return fmt::format("Var_{}", index); }

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls `fn(word)` for each identifier-shaped word in free text and returns
// the text with each word replaced by fn's result. Quoted runs are copied
// verbatim when `skip_quotes` is set (preprocessor lines).
std::string map_words(std::string_view text, bool skip_quotes,
                      const std::function<std::string_view(std::string_view)>& fn) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (skip_quotes && (c == '"' || c == '\'')) {
            auto j = i + 1;
            while (j < text.size() && text[j] != c && text[j] != '\n') {
                if (text[j] == '\\' && j + 1 < text.size()) ++j;
                ++j;
            }
            j = std::min(text.size(), j + 1);
            out.append(text.substr(i, j - i));
            i = j;
        } else if (word_char(c)) {
            auto j = i;
            while (j < text.size() && word_char(text[j])) ++j;
            auto word = text.substr(i, j - i);
            if (std::isdigit(static_cast<unsigned char>(c))) out.append(word);
            else out.append(fn(word));
            i = j;
        } else {
            out.push_back(c);
            ++i;
        }
    }
    return out;
}

// Rewrites every identifier occurrence outside string/char literals.
std::string map_identifiers(std::string_view code, const std::function<std::string_view(std::string_view)>& fn) {
    auto lexed = lex_c(code);
    std::string out;
    out.reserve(code.size());
    std::size_t pos = 0;
    for (const auto& tok : lexed.tokens) {
        out.append(code.substr(pos, tok.begin - pos));  // whitespace between tokens
        auto text = tok.text(code);
        switch (tok.kind) {
            case CTokenKind::identifier: out.append(fn(text)); break;
            case CTokenKind::line_comment:
            case CTokenKind::block_comment: out.append(map_words(text, false, fn)); break;
            case CTokenKind::directive: out.append(map_words(text, true, fn)); break;
            default: out.append(text); break;
        }
        pos = tok.end;
    }
    out.append(code.substr(pos));
    return out;
}

struct Replacement {
    std::string original;
    std::string replacement;
};

std::vector<Replacement> replacements_for(const SymbolTable& table, StripKind kind) {
    std::vector<Replacement> out;
    bool all = kind == StripKind::all;
    if (all || kind == StripKind::func_names)
        for (const auto& [name, addr] : table.function_names) out.push_back({name, function_placeholder(addr)});
    if (all || kind == StripKind::var_names)
        for (std::size_t i = 0; i < table.variable_names.size(); ++i)
            out.push_back({table.variable_names[i], variable_placeholder(i)});
    if (all || kind == StripKind::types)
        for (const auto& t : table.type_names) out.push_back({t, std::string(kUndefinedType)});
    return out;
}

void check_identifier(std::string_view name, std::string_view what) {
    if (!is_identifier(name)) throw ValidationError(fmt::format("{} '{}' is not an identifier", what, name));
}

}  // namespace

std::vector<std::string> identifier_occurrences(std::string_view code) {
    std::vector<std::string> out;
    map_identifiers(code, [&](std::string_view w) {
        out.emplace_back(w);
        return w;
    });
    return out;
}

std::string strip(std::string_view code, const SymbolTable& table, StripKind kind) {
    auto reps = replacements_for(table, kind);
    if (reps.empty()) return std::string(code);

    std::unordered_map<std::string, std::string> mapping;
    for (const auto& r : reps) {
        check_identifier(r.original, "symbol");
        auto [it, inserted] = mapping.emplace(r.original, r.replacement);
        if (!inserted && it->second != r.replacement)
            throw ConsistencyError(
                fmt::format("'{}' is listed twice with different replacements ({} and {})", r.original, it->second,
                            r.replacement));
    }

    // Consistency against the code.
    auto occurrences = identifier_occurrences(code);
    std::unordered_map<std::string, std::size_t> first_seen;
    for (std::size_t i = 0; i < occurrences.size(); ++i) first_seen.emplace(occurrences[i], i);
    for (const auto& r : reps) {
        if (!first_seen.count(r.original) && !first_seen.count(r.replacement))
            throw ConsistencyError(fmt::format("symbol '{}' does not occur in the code", r.original));
    }
    if (kind == StripKind::all || kind == StripKind::var_names) {
        std::size_t last = 0;
        const std::string* prev = nullptr;
        for (const auto& v : table.variable_names) {
            auto it = first_seen.find(v);
            if (it == first_seen.end()) continue;
            if (prev && it->second < last)
                throw ConsistencyError(
                    fmt::format("variables out of first-occurrence order: '{}' appears before '{}'", v, *prev));
            last = it->second;
            prev = &v;
        }
    }

    return map_identifiers(code, [&](std::string_view w) -> std::string_view {
        auto it = mapping.find(std::string(w));
        return it == mapping.end() ? w : std::string_view(it->second);
    });
}

std::string rename_function(std::string_view code, std::string_view old_name, std::string_view new_name) {
    check_identifier(old_name, "old name");
    check_identifier(new_name, "new name");
    std::size_t hits = 0;
    auto out = map_identifiers(code, [&](std::string_view w) -> std::string_view {
        if (w != old_name) return w;
        ++hits;
        return new_name;
    });
    if (hits == 0) throw NoOpError(fmt::format("'{}' does not occur as an identifier", old_name));
    return out;
}

// --- inference ------------------------------------------------------------

namespace {

const std::set<std::string, std::less<>> kBaseTypes = {
    "char",  "short",  "int",    "long",   "float",  "double", "signed", "unsigned", "_Bool", "bool",
    "byte",  "uint",   "ulong",  "ushort", "uchar",  "word",   "dword",  "qword",    "longlong",
    "ulonglong", "size_t", "ssize_t", "code", "float10", "sbyte", "sword", "sdword", "sqword"};

const std::set<std::string, std::less<>> kQualifiers = {"const", "volatile", "static", "extern", "register",
                                                         "inline", "restrict", "__restrict", "auto"};

const std::set<std::string, std::less<>> kKeywords = {
    "if",     "else",  "while",  "for",     "do",      "switch", "case",   "default", "break",  "continue",
    "return", "goto",  "sizeof", "typedef", "struct",  "union",  "enum",   "void",    "const",  "volatile",
    "static", "extern", "register", "inline", "restrict", "auto", "__restrict", "NULL", "true", "false"};

bool is_type_name(std::string_view w) {
    if (kBaseTypes.count(w)) return true;
    if (w.size() > 2 && w.substr(w.size() - 2) == "_t") return true;
    if (w.rfind("undefined", 0) == 0 && w.size() > 9 &&
        std::all_of(w.begin() + 9, w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return true;
    return false;
}

}  // namespace

SymbolTable infer_symbol_table(std::string_view code, std::string_view function_name, std::uint64_t address) {
    SymbolTable table;
    auto lexed = lex_c(code);
    std::vector<std::string_view> toks;  // code tokens only
    std::vector<CTokenKind> kinds;
    for (const auto& t : lexed.tokens) {
        if (t.is_comment() || t.kind == CTokenKind::directive) continue;
        toks.push_back(t.text(code));
        kinds.push_back(t.kind);
    }
    auto ident = [&](std::size_t i) { return i < toks.size() && kinds[i] == CTokenKind::identifier; };

    std::set<std::string, std::less<>> types_seen, vars_seen;
    std::vector<std::string> types;
    auto add_type = [&](std::string_view t) {
        if (t != kUndefinedType && types_seen.emplace(t).second) types.emplace_back(t);
    };

    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!ident(i)) continue;
        auto w = toks[i];
        bool tag = (w == "struct" || w == "union" || w == "enum") && ident(i + 1);
        if (tag) add_type(toks[i + 1]);
        if (!tag && !is_type_name(w) && w != "void") continue;
        if (!tag && w != "void") add_type(w);
        // Walk the rest of the declaration specifier and declarator:
        // `unsigned long *const name` -> name.
        std::size_t j = i + (tag ? 2 : 1);
        while (j < toks.size()) {
            if (ident(j) && (kQualifiers.count(toks[j]) || is_type_name(toks[j]))) {
                if (is_type_name(toks[j])) add_type(toks[j]);
                ++j;
            } else if (toks[j] == "*" || toks[j] == "(") {
                ++j;
            } else {
                break;
            }
        }
        if (!ident(j) || kKeywords.count(toks[j]) || toks[j] == function_name) continue;
        // A following '(' means a function declarator, not a variable.
        if (j + 1 < toks.size() && toks[j + 1] == "(") continue;
        // Casts such as `(int)x` end at ')' before the identifier.
        if (j > 0 && toks[j - 1] == ")") continue;
        if (vars_seen.emplace(toks[j]).second) table.variable_names.emplace_back(toks[j]);
        i = j;
    }

    // Order variables by first occurrence in the text, which is what the
    // declaration walk yields except for K&R-style parameter lists.
    auto occ = identifier_occurrences(code);
    std::unordered_map<std::string, std::size_t> first;
    for (std::size_t k = 0; k < occ.size(); ++k) first.emplace(occ[k], k);
    std::stable_sort(table.variable_names.begin(), table.variable_names.end(),
                     [&](const std::string& a, const std::string& b) { return first[a] < first[b]; });

    table.type_names = std::move(types);
    if (!function_name.empty() && is_identifier(function_name) && first.count(std::string(function_name)))
        table.function_names.emplace(function_name, address);
    return table;
}

}  // namespace binsum::ablation
