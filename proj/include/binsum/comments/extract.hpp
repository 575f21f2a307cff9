#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "binsum/model/record.hpp"

namespace binsum::comments {

// A file-scope function definition.
struct FunctionDecl {
    std::string sig;   // raw signature text, may span several lines
    std::string name;
    std::size_t start_line = 0;
    std::size_t end_line = 0;  // line of the closing brace
    std::string file;
    std::string source;  // full definition text, signature through closing brace
};

struct CommentSpan {
    std::string text;  // delimiters removed, whitespace collapsed
    std::size_t start_line = 0;
    std::size_t end_line = 0;
    std::string file;
    // Code shares the first or last line of the comment (`x = 1; // note`).
    bool shares_line_with_code = false;
    bool inside_function = false;
};

struct SourceFunctionComment {
    std::string name;
    std::string sig;
    std::string comment;
    std::string file;
    std::pair<std::size_t, std::size_t> func_lines{0, 0};
    std::string source;

    bool operator==(const SourceFunctionComment&) const = default;
};

// Blank-line lookup for one file; lines are 1-based.
class LineMap {
public:
    LineMap() = default;
    explicit LineMap(std::string_view text);
    [[nodiscard]] bool is_blank(std::size_t line) const;
    [[nodiscard]] std::size_t line_count() const { return blank_.size(); }

private:
    std::vector<bool> blank_;
};

struct ParsedSource {
    std::vector<FunctionDecl> decls;
    std::vector<CommentSpan> comments;
    LineMap lines;
    std::vector<std::string> warnings;
};

ParsedSource parse_source(std::string_view source_text, const std::string& file);

// Throws IoError when the file cannot be read.
ParsedSource parse_source_file(const std::filesystem::path& path, const std::string& display_name);

// Strips comment delimiters and gutters, collapses whitespace.
std::string normalize_comment(std::string_view raw);

// Pairs each declaration with the comment that ends above it, separated only
// by blank lines. Comments inside bodies or sharing a line with code never pair.
std::vector<SourceFunctionComment> associate(const std::vector<FunctionDecl>& decls,
                                             const std::vector<CommentSpan>& comments,
                                             const LineMap& lines);

inline std::vector<SourceFunctionComment> associate(const ParsedSource& parsed) {
    return associate(parsed.decls, parsed.comments, parsed.lines);
}

// Collapses exact duplicates and drops every name seen with two or more
// distinct comments. Keeps first-occurrence order.
std::vector<SourceFunctionComment> clean_corpus(const std::vector<SourceFunctionComment>& pairs);

struct HarvestResult {
    std::vector<SourceFunctionComment> pairs;  // cleaned
    std::size_t files = 0;
    std::size_t raw_pairs = 0;
    std::vector<std::string> warnings;
};

// Parses every file under `root` whose file name matches `glob` (fnmatch
// syntax), in sorted path order, then associates and cleans.
HarvestResult harvest_directory(const std::filesystem::path& root, const std::string& glob = "*.c",
                                std::size_t workers = 1);

// Corpus persistence in the dataset line format: binary_path holds the source
// file, the pc range holds the half-open line range, reps holds `source`.
model::FunctionRecord to_corpus_record(const SourceFunctionComment& pair, const std::string& project);
SourceFunctionComment from_corpus_record(const model::FunctionRecord& record);

}  // namespace binsum::comments
