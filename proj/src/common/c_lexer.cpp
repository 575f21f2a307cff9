#include "binsum/common/c_lexer.hpp"

#include <cctype>

namespace binsum {

namespace {

bool ident_start(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalpha(u) || u == '_' || u == '$' || u >= 0x80;
}

bool ident_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_' || u == '$' || u >= 0x80;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    CLexResult run() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                advance();
                in_directive_ = false;
                at_line_start_ = true;
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {  // line splice
                advance();
                advance();
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                block_comment();
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                line_comment();
                continue;
            }
            if (in_directive_ || (c == '#' && at_line_start_)) {
                directive();
                continue;
            }
            at_line_start_ = false;
            if (c == '"' || c == '\'') {
                quoted(c, c == '"' ? CTokenKind::string_literal : CTokenKind::char_literal);
            } else if (ident_start(c)) {
                // L"..", u8"..", u'..' prefixes belong to the literal
                auto start = pos_;
                auto line = line_;
                while (pos_ < src_.size() && ident_char(src_[pos_])) advance();
                auto word = src_.substr(start, pos_ - start);
                if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') &&
                    (word == "L" || word == "u" || word == "U" || word == "u8")) {
                    char q = src_[pos_];
                    quoted(q, q == '"' ? CTokenKind::string_literal : CTokenKind::char_literal, start, line);
                } else {
                    emit(CTokenKind::identifier, start, line);
                }
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                number();
            } else {
                auto start = pos_;
                auto line = line_;
                advance();
                emit(CTokenKind::punct, start, line);
            }
        }
        return std::move(result_);
    }

private:
    char peek(std::size_t ahead) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance() {
        if (src_[pos_] == '\n') ++line_;
        ++pos_;
    }

    void emit(CTokenKind kind, std::size_t start, std::size_t line) {
        std::size_t end_line = line_;
        if (pos_ > start && src_[pos_ - 1] == '\n') --end_line;
        result_.tokens.push_back({kind, start, pos_, line, end_line});
    }

    void block_comment() {
        auto start = pos_;
        auto line = line_;
        advance();
        advance();
        while (pos_ < src_.size() && !(src_[pos_] == '*' && peek(1) == '/')) advance();
        if (pos_ >= src_.size()) {
            result_.unterminated_comment = true;
            result_.unterminated_line = line;
        } else {
            advance();
            advance();
        }
        emit(CTokenKind::block_comment, start, line);
    }

    void line_comment() {
        auto start = pos_;
        auto line = line_;
        while (pos_ < src_.size() && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && peek(1) == '\n') advance();
            advance();
        }
        emit(CTokenKind::line_comment, start, line);
    }

    void quoted(char quote, CTokenKind kind) { quoted(quote, kind, pos_, line_); }

    void quoted(char quote, CTokenKind kind, std::size_t start, std::size_t line) {
        advance();
        while (pos_ < src_.size() && src_[pos_] != quote && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) advance();
            advance();
        }
        if (pos_ < src_.size() && src_[pos_] == quote) advance();
        emit(kind, start, line);
    }

    void number() {
        auto start = pos_;
        auto line = line_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (ident_char(c) || c == '.') {
                advance();
            } else if ((c == '+' || c == '-') && pos_ > start) {
                char prev = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_ - 1])));
                if (prev == 'e' || prev == 'p') advance();
                else break;
            } else {
                break;
            }
        }
        emit(CTokenKind::number, start, line);
    }

    // Consumes directive text up to the end of line or the next comment.
    void directive() {
        in_directive_ = true;
        at_line_start_ = false;
        auto start = pos_;
        auto line = line_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') break;
            if (c == '\\' && peek(1) == '\n') {
                advance();
                advance();
                continue;
            }
            if (c == '/' && (peek(1) == '*' || peek(1) == '/')) break;
            if (c == '"' || c == '\'') {
                advance();
                while (pos_ < src_.size() && src_[pos_] != c && src_[pos_] != '\n') {
                    if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) advance();
                    advance();
                }
                if (pos_ < src_.size() && src_[pos_] == c) advance();
                continue;
            }
            advance();
        }
        // trailing whitespace stays outside the token
        auto end = pos_;
        while (end > start && std::isspace(static_cast<unsigned char>(src_[end - 1]))) --end;
        if (end > start) {
            std::size_t end_line = line;
            for (auto i = start; i < end; ++i)
                if (src_[i] == '\n') ++end_line;
            result_.tokens.push_back({CTokenKind::directive, start, end, line, end_line});
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    bool at_line_start_ = true;
    bool in_directive_ = false;
    CLexResult result_;
};

}  // namespace

CLexResult lex_c(std::string_view source) { return Lexer(source).run(); }

}  // namespace binsum
