#include "binsum/comments/extract.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <unordered_map>

#include <fmt/format.h>

#include "binsum/common/c_lexer.hpp"
#include "binsum/common/error.hpp"
#include "binsum/common/parallel.hpp"
#include "binsum/common/text.hpp"

namespace binsum::comments {

namespace {

constexpr std::array<std::string_view, 12> kNotAName = {
    "if", "while", "for", "switch", "return", "sizeof", "__attribute__", "__declspec",
    "__asm__", "asm", "_Alignas", "__typeof__",
};

// Keywords whose parenthesized argument is part of the declaration
// specifiers, not a stray macro invocation.
constexpr std::array<std::string_view, 6> kSpecifierCalls = {
    "__attribute__", "__declspec", "_Alignas", "__typeof__", "typeof", "__asm__",
};

bool one_of(std::string_view s, auto const& set) { return std::find(set.begin(), set.end(), s) != set.end(); }

class DeclParser {
public:
    DeclParser(std::string_view text, const CLexResult& lexed, const std::string& file)
        : text_(text), file_(file) {
        for (std::size_t i = 0; i < lexed.tokens.size(); ++i)
            if (!lexed.tokens[i].is_comment()) code_.push_back(lexed.tokens[i]);
    }

    std::vector<FunctionDecl> run(std::vector<std::pair<std::size_t, std::size_t>>& bodies,
                                  std::vector<std::string>& warnings) {
        std::vector<FunctionDecl> decls;
        std::size_t seg_begin = 0;
        std::vector<std::pair<std::size_t, std::size_t>> chain;  // segments closed by ';'
        int parens = 0;
        for (std::size_t i = 0; i < code_.size(); ++i) {
            const auto& tok = code_[i];
            if (tok.kind == CTokenKind::directive) {
                seg_begin = i + 1;
                chain.clear();
                parens = 0;
                continue;
            }
            if (tok.kind != CTokenKind::punct) continue;
            char c = text_[tok.begin];
            if (c == '(') {
                ++parens;
            } else if (c == ')') {
                if (parens > 0) --parens;
            } else if (c == ';' && parens == 0) {
                chain.emplace_back(seg_begin, i);
                seg_begin = i + 1;
            } else if (c == '}') {
                seg_begin = i + 1;
                chain.clear();
                parens = 0;
            } else if (c == '{') {
                auto close = matching_brace(i);
                if (!close) {
                    warnings.push_back(fmt::format("{}:{}: unbalanced '{{'", file_, tok.line));
                    close = code_.size() - 1;
                }
                if (auto decl = try_function(seg_begin, i, chain, *close)) {
                    bodies.emplace_back(code_[i].begin, code_[*close].end);
                    decls.push_back(std::move(*decl));
                    seg_begin = *close + 1;
                    chain.clear();
                    parens = 0;
                }
                i = *close;
            }
        }
        return decls;
    }

private:
    bool is_punct(std::size_t i, char c) const {
        return code_[i].kind == CTokenKind::punct && text_[code_[i].begin] == c;
    }
    bool is_ident(std::size_t i) const { return code_[i].kind == CTokenKind::identifier; }
    std::string_view tok_text(std::size_t i) const { return code_[i].text(text_); }

    std::optional<std::size_t> matching_brace(std::size_t open) const {
        int depth = 0;
        for (std::size_t i = open; i < code_.size(); ++i) {
            if (is_punct(i, '{')) ++depth;
            else if (is_punct(i, '}') && --depth == 0) return i;
        }
        return std::nullopt;
    }

    // Index of the '(' matching the ')' at `close`, scanning back to `lo`.
    std::optional<std::size_t> matching_open(std::size_t close, std::size_t lo) const {
        int depth = 0;
        for (std::size_t i = close + 1; i-- > lo;) {
            if (is_punct(i, ')')) ++depth;
            else if (is_punct(i, '(') && --depth == 0) return i;
        }
        return std::nullopt;
    }

    std::optional<std::size_t> matching_close(std::size_t open, std::size_t hi) const {
        int depth = 0;
        for (std::size_t i = open; i < hi; ++i) {
            if (is_punct(i, '(')) ++depth;
            else if (is_punct(i, ')') && --depth == 0) return i;
        }
        return std::nullopt;
    }

    bool has_top_level_assign(std::size_t b, std::size_t e) const {
        int depth = 0;
        for (auto i = b; i < e; ++i) {
            if (is_punct(i, '(')) ++depth;
            else if (is_punct(i, ')')) --depth;
            else if (depth == 0 && is_punct(i, '=')) return true;
        }
        return false;
    }

    // Drops trailing `__attribute__((...))` groups; returns the new end.
    std::size_t strip_trailing_attributes(std::size_t b, std::size_t e) const {
        while (e > b && is_punct(e - 1, ')')) {
            auto open = matching_open(e - 1, b);
            if (!open || *open == b || !is_ident(*open - 1) || !one_of(tok_text(*open - 1), kSpecifierCalls)) break;
            e = *open - 1;
        }
        return e;
    }

    struct Declarator {
        std::size_t name;
        std::size_t scan_limit;  // junk scanning stops here
    };

    // `close` is the ')' of the parameter list.
    std::optional<Declarator> declarator(std::size_t b, std::size_t close) const {
        auto open = matching_open(close, b);
        if (!open || *open == b) return std::nullopt;
        auto before = *open - 1;
        if (is_ident(before) && is_identifier(tok_text(before)) && !one_of(tok_text(before), kNotAName))
            return Declarator{before, before};
        if (is_punct(before, ')')) {
            // function returning a function pointer: T (*name(params))(params)
            auto outer = matching_open(before, b);
            if (!outer) return std::nullopt;
            auto k = *outer + 1;
            while (k < before && is_punct(k, '*')) ++k;
            if (k + 1 < before && is_ident(k) && is_punct(k + 1, '(') && is_identifier(tok_text(k)))
                return Declarator{k, *outer};
        }
        return std::nullopt;
    }

    // Leading tokens that end in a stray macro invocation `FOO(x)` are not
    // part of the signature.
    std::size_t signature_start(std::size_t b, std::size_t limit) const {
        std::size_t start = b;
        for (std::size_t i = b; i < limit; ++i) {
            if (!is_punct(i, '(')) continue;
            auto close = matching_close(i, limit);
            if (!close) break;
            bool specifier = i > b && is_ident(i - 1) && one_of(tok_text(i - 1), kSpecifierCalls);
            if (!specifier) start = *close + 1;
            i = *close;
        }
        return start;
    }

    // Old-style definition head: `name(a, b)` followed by parameter declarations.
    std::optional<std::size_t> knr_param_list(std::size_t b, std::size_t e) const {
        for (std::size_t i = b + 1; i < e; ++i) {
            if (!is_punct(i, '(') || !is_ident(i - 1) || one_of(tok_text(i - 1), kNotAName)) continue;
            auto close = matching_close(i, e);
            if (!close || *close + 1 >= e) return std::nullopt;
            bool ident_list = true;
            for (auto k = i + 1; k < *close; ++k)
                if (!is_ident(k) && !is_punct(k, ',')) ident_list = false;
            if (ident_list) return *close;
            return std::nullopt;
        }
        return std::nullopt;
    }

    std::optional<FunctionDecl> try_function(std::size_t seg_begin, std::size_t brace,
                                             const std::vector<std::pair<std::size_t, std::size_t>>& chain,
                                             std::size_t close_brace) const {
        std::size_t head_begin = seg_begin;
        std::size_t sig_end = 0;  // last token of the signature
        std::optional<Declarator> decl;
        if (brace > seg_begin) {
            auto end = strip_trailing_attributes(seg_begin, brace);
            if (end == seg_begin || !is_punct(end - 1, ')')) return std::nullopt;
            if (tok_text(seg_begin) == "typedef" || has_top_level_assign(seg_begin, end)) return std::nullopt;
            decl = declarator(seg_begin, end - 1);
            sig_end = brace - 1;
        } else {
            for (auto it = chain.rbegin(); it != chain.rend() && !decl; ++it) {
                auto params = knr_param_list(it->first, it->second);
                if (!params) continue;
                head_begin = it->first;
                decl = declarator(head_begin, *params);
            }
            if (!decl) return std::nullopt;
            sig_end = chain.back().second;
        }
        if (!decl) return std::nullopt;
        auto start = signature_start(head_begin, decl->scan_limit);
        if (start > decl->name) return std::nullopt;

        FunctionDecl d;
        d.name = std::string(tok_text(decl->name));
        d.sig = sanitize_utf8(trim(text_.substr(code_[start].begin, code_[sig_end].end - code_[start].begin)));
        d.source = sanitize_utf8(text_.substr(code_[start].begin, code_[close_brace].end - code_[start].begin));
        d.start_line = code_[start].line;
        d.end_line = code_[close_brace].end_line;
        d.file = file_;
        return d;
    }

    std::string_view text_;
    const std::string& file_;
    std::vector<CToken> code_;
};

std::string strip_delimiters(std::string_view raw) {
    if (raw.starts_with("/*")) {
        raw.remove_prefix(2);
        if (raw.ends_with("*/")) raw.remove_suffix(2);
        return std::string(raw);
    }
    std::string out;
    for (const auto& line : split_lines(raw)) {
        std::string_view l = trim(line);
        while (!l.empty() && l.front() == '/') l.remove_prefix(1);
        out += l;
        out += '\n';
    }
    return out;
}

}  // namespace

LineMap::LineMap(std::string_view text) {
    for (const auto& line : split_lines(text)) blank_.push_back(trim(line).empty());
}

bool LineMap::is_blank(std::size_t line) const {
    return line >= 1 && line <= blank_.size() && blank_[line - 1];
}

std::string normalize_comment(std::string_view raw) {
    auto body = strip_delimiters(raw);
    auto lines = split_lines(body);
    std::string joined;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view l = trim(lines[i]);
        while (!l.empty() && l.front() == '*') l.remove_prefix(1);
        // right-hand box border, or the `**` before the closing delimiter
        auto stars = l.size();
        while (stars > 0 && l[stars - 1] == '*') --stars;
        if (stars < l.size() && (i + 1 == lines.size() || stars == 0 ||
                                 std::isspace(static_cast<unsigned char>(l[stars - 1]))))
            l = l.substr(0, stars);
        joined += l;
        joined += ' ';
    }
    std::string out;
    bool pending_space = false;
    for (char c : joined) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return sanitize_utf8(out);
}

ParsedSource parse_source(std::string_view text, const std::string& file) {
    ParsedSource out;
    out.lines = LineMap(text);
    auto lexed = lex_c(text);
    if (lexed.unterminated_comment)
        out.warnings.push_back(fmt::format("{}:{}: unterminated block comment", file, lexed.unterminated_line));

    std::vector<std::pair<std::size_t, std::size_t>> bodies;
    out.decls = DeclParser(text, lexed, file).run(bodies, out.warnings);

    const auto& toks = lexed.tokens;
    auto inside_body = [&](std::size_t offset) {
        return std::any_of(bodies.begin(), bodies.end(),
                           [&](const auto& b) { return offset >= b.first && offset < b.second; });
    };
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!toks[i].is_comment()) continue;
        CommentSpan span;
        span.file = file;
        span.start_line = toks[i].line;
        span.inside_function = inside_body(toks[i].begin);
        std::string text_acc = normalize_comment(toks[i].text(text));
        bool code_before = false;
        for (auto k = i; k-- > 0;) {
            if (!toks[k].is_comment()) {
                code_before = toks[k].end_line == toks[i].line;
                break;
            }
        }
        std::size_t last = i;
        // runs of `//` lines on consecutive lines form one comment
        while (!code_before && toks[last].kind == CTokenKind::line_comment && last + 1 < toks.size() &&
               toks[last + 1].kind == CTokenKind::line_comment && toks[last + 1].line == toks[last].end_line + 1) {
            ++last;
            auto piece = normalize_comment(toks[last].text(text));
            if (!piece.empty()) {
                if (!text_acc.empty()) text_acc += ' ';
                text_acc += piece;
            }
        }
        span.end_line = toks[last].end_line;
        bool code_after = false;
        for (auto k = last + 1; k < toks.size(); ++k) {
            if (!toks[k].is_comment()) {
                code_after = toks[k].line == toks[last].end_line;
                break;
            }
        }
        span.shares_line_with_code = code_before || code_after;
        span.text = std::move(text_acc);
        i = last;
        if (!span.text.empty()) out.comments.push_back(std::move(span));
    }
    return out;
}

ParsedSource parse_source_file(const std::filesystem::path& path, const std::string& display_name) {
    return parse_source(read_file(path), display_name);
}

std::vector<SourceFunctionComment> associate(const std::vector<FunctionDecl>& decls,
                                             const std::vector<CommentSpan>& comments, const LineMap& lines) {
    std::vector<SourceFunctionComment> out;
    std::vector<bool> used(comments.size(), false);
    for (const auto& d : decls) {
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < comments.size(); ++c) {
            const auto& span = comments[c];
            if (used[c] || span.inside_function || span.shares_line_with_code) continue;
            if (span.file != d.file || span.end_line >= d.start_line) continue;
            bool only_blank = true;
            for (auto l = span.end_line + 1; l < d.start_line && only_blank; ++l) only_blank = lines.is_blank(l);
            if (only_blank && (!best || comments[*best].end_line <= span.end_line)) best = c;
        }
        if (!best) continue;
        used[*best] = true;
        out.push_back({d.name, d.sig, comments[*best].text, d.file, {d.start_line, d.end_line}, d.source});
    }
    return out;
}

std::vector<SourceFunctionComment> clean_corpus(const std::vector<SourceFunctionComment>& pairs) {
    struct Entry {
        std::size_t first;
        bool ambiguous = false;
    };
    std::unordered_map<std::string, Entry> by_name;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [it, inserted] = by_name.try_emplace(pairs[i].name, Entry{i});
        if (!inserted && pairs[it->second.first].comment != pairs[i].comment) it->second.ambiguous = true;
    }
    std::vector<SourceFunctionComment> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& e = by_name.at(pairs[i].name);
        if (e.first == i && !e.ambiguous) out.push_back(pairs[i]);
    }
    return out;
}

HarvestResult harvest_directory(const std::filesystem::path& root, const std::string& glob, std::size_t workers) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError(fmt::format("not a directory: {}", root.string()));
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (fnmatch(glob.c_str(), entry.path().filename().c_str(), 0) == 0) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<ParsedSource> parsed(files.size());
    parallel_for(files.size(), workers, [&](std::size_t i) {
        parsed[i] = parse_source_file(files[i], fs::relative(files[i], root).generic_string());
    });

    HarvestResult result;
    result.files = files.size();
    std::vector<SourceFunctionComment> all;
    for (auto& p : parsed) {
        auto pairs = associate(p);
        all.insert(all.end(), pairs.begin(), pairs.end());
        result.warnings.insert(result.warnings.end(), p.warnings.begin(), p.warnings.end());
    }
    result.raw_pairs = all.size();
    result.pairs = clean_corpus(all);
    return result;
}

model::FunctionRecord to_corpus_record(const SourceFunctionComment& pair, const std::string& project) {
    model::FunctionRecord r;
    r.id = fmt::format("{}:{}:{}", project, pair.file, pair.name);
    r.project = project;
    r.binary_path = pair.file;
    r.name = pair.name;
    r.low_pc = pair.func_lines.first;
    r.high_pc = pair.func_lines.second + 1;
    r.comment = pair.comment;
    r.reps.emplace(model::RepKind::source, pair.source);
    return r;
}

SourceFunctionComment from_corpus_record(const model::FunctionRecord& record) {
    SourceFunctionComment pair;
    pair.name = record.name;
    pair.comment = record.comment;
    pair.file = record.binary_path;
    pair.func_lines = {record.low_pc, record.high_pc - 1};
    if (auto it = record.reps.find(model::RepKind::source); it != record.reps.end()) {
        pair.source = it->second;
        auto parsed = parse_source(pair.source, pair.file);
        for (const auto& d : parsed.decls)
            if (d.name == pair.name) {
                pair.sig = d.sig;
                break;
            }
    }
    return pair;
}

}  // namespace binsum::comments
