#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "binsum/common/error.hpp"

namespace binsum::llm {

// A few-shot demonstration equals the test input.
class LeakageError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "leakage"; }
};

struct CompletionParams {
    std::string model = "mock";
    double temperature = 0.1;
    double top_p = 1.0;
    int n = 1;
    std::optional<int> max_tokens;

    void validate() const;  // throws ConfigError
};

struct PromptMode {
    enum class Kind { zero_shot, few_shot, chain_of_thought };
    Kind kind = Kind::zero_shot;
    int shots = 0;  // few_shot only

    static PromptMode zero_shot() { return {Kind::zero_shot, 0}; }
    static PromptMode few_shot(int shots = 2) { return {Kind::few_shot, shots}; }
    static PromptMode chain_of_thought() { return {Kind::chain_of_thought, 0}; }

    bool operator==(const PromptMode&) const = default;
};

// "zero_shot", "few_shot" (2 shots), "few_shot:3", "cot".
PromptMode parse_prompt_mode(std::string_view text);
std::string to_string(const PromptMode& mode);

struct Demo {
    std::string code;
    std::string summary;
};

struct Request {
    std::string instruction;  // prompt with the word-limit clause
    std::string body;         // full user message
    PromptMode mode;
    CompletionParams params;
    std::string cache_key;    // sha256 over the canonical JSON of everything above
};

std::string compute_cache_key(const Request& request);

// Canonical wording of the representation in "Input <rep> code:".
std::string rep_label(std::string_view rep_kind);

// `prompt` may carry a `{word_limit}` placeholder; otherwise the sentence
// "Summarize the function in N words." is appended. Body layout:
//   <instruction>\n\n
//   [Input <rep> code:\n<demo code>\nFunction Summary: <demo summary>\n\n]...
//   Input <rep> code:\n<code>\nFunction Summary:
Request assemble_request(std::string_view prompt, std::string_view code, const PromptMode& mode, int word_limit,
                         const std::vector<Demo>& demos = {}, const CompletionParams& params = {},
                         std::string_view rep = "decompiled");

std::string instruction_with_limit(std::string_view prompt, int word_limit);

// Two-stage chain-of-thought request bodies.
inline constexpr std::string_view kCotTrigger = "Let's think step by step.";
Request assemble_cot_explanation(std::string_view prompt, std::string_view code, const CompletionParams& params = {},
                                 std::string_view rep = "decompiled");
Request assemble_cot_summary(std::string_view prompt, std::string_view code, std::string_view explanation,
                             int word_limit, const CompletionParams& params = {},
                             std::string_view rep = "decompiled");

// A free-form query (meta-instructions); the whole text is the body.
Request plain_request(std::string_view text, const CompletionParams& params = {});

// ceil(utf8 bytes / 4).
std::size_t count_tokens(std::string_view text);

}  // namespace binsum::llm
