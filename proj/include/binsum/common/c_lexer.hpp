#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace binsum {

enum class CTokenKind {
    identifier,
    number,
    string_literal,
    char_literal,
    line_comment,
    block_comment,
    directive,  // preprocessor line(s), comments inside it are split out
    punct,
};

struct CToken {
    CTokenKind kind;
    std::size_t begin;  // byte offsets into the lexed text, [begin, end)
    std::size_t end;
    std::size_t line;  // 1-based line of `begin`
    std::size_t end_line;  // 1-based line of the last byte

    [[nodiscard]] std::string_view text(std::string_view source) const {
        return source.substr(begin, end - begin);
    }
    [[nodiscard]] bool is_comment() const {
        return kind == CTokenKind::line_comment || kind == CTokenKind::block_comment;
    }
};

struct CLexResult {
    std::vector<CToken> tokens;
    bool unterminated_comment = false;
    std::size_t unterminated_line = 0;
};

// Tolerant lexer for C and C-like decompiler output. Whitespace is not
// emitted; every other byte belongs to exactly one token. Never throws.
CLexResult lex_c(std::string_view source);

}  // namespace binsum
