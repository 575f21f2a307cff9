#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "binsum/common/error.hpp"
#include "binsum/llm/gateway.hpp"
#include "binsum/model/record.hpp"

namespace binsum::prompts {

class EmptyPoolError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "empty_pool"; }
};

class SelectionError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "selection"; }
};

enum class Origin { human, synthesized, variant, optimized };
std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view text);

struct PromptCandidate {
    std::string id;
    std::string text;
    Origin origin = Origin::human;
    std::optional<std::string> parent_id;
    std::optional<double> score;

    bool operator==(const PromptCandidate&) const = default;
};

// Stable id: origin initial + '-' + 12 hex digits of sha256(origin, parent, text).
PromptCandidate make_candidate(std::string text, Origin origin, std::optional<std::string> parent_id = {});
void validate(const PromptCandidate& candidate);

// Prompt pools as JSON lines {id, text, origin, parent, score}.
std::string encode_candidate(const PromptCandidate& candidate);
PromptCandidate decode_candidate(std::string_view line, std::size_t line_no = 0);
std::vector<PromptCandidate> read_pool(const std::filesystem::path& path);
void write_pool(const std::filesystem::path& path, const std::vector<PromptCandidate>& pool);

// Template files: `<dir>/<name>.txt` where dir is BINSUM_TEMPLATE_DIR from the
// environment, else the installed default. `{key}` placeholders are filled
// by fill_template.
std::filesystem::path template_dir();
std::string load_template(std::string_view name, const std::optional<std::filesystem::path>& dir = {});
std::string fill_template(std::string_view text, const std::vector<std::pair<std::string, std::string>>& values);

// One prompt per line; strips "1." / "1)" / "-" / "*" markers and quotes,
// drops blanks and case-insensitive duplicates. Keeps order.
std::vector<std::string> parse_prompt_list(std::string_view llm_output);

struct LabOptions {
    llm::CompletionParams params;
    std::optional<std::filesystem::path> template_dir;
};

std::vector<PromptCandidate> synthesize(llm::Gateway& gateway, std::string_view meta_instruction, int k,
                                        const LabOptions& options = {});
std::vector<PromptCandidate> generate_variants(llm::Gateway& gateway, const PromptCandidate& candidate, int m,
                                               const LabOptions& options = {});
// One top-1 rewrite per candidate; unchanged rewrites are dropped.
std::vector<PromptCandidate> optimize(llm::Gateway& gateway, const std::vector<PromptCandidate>& candidates,
                                      std::string_view meta_objective, const LabOptions& options = {});

PromptCandidate human_seed(const LabOptions& options = {});

struct SelectionConfig {
    std::size_t sample_size = 50;
    std::uint64_t seed = 0;
    std::string metric = "semantic";  // semantic | bleu1 | meteor | rouge_l
};

// Per-sample score of a candidate on one record.
using SampleScorer = std::function<double(const PromptCandidate&, const model::FunctionRecord&)>;

struct SelectionResult {
    std::vector<PromptCandidate> ranked;      // scores filled, best first
    std::vector<std::string> sample_ids;      // record ids of the shared subset, draw order
    std::vector<std::vector<double>> per_sample;  // [ranked index][sample index]
};

// Draws one seeded subset (without replacement), scores every candidate on
// it, ranks by mean descending with ascending id as tie-break.
SelectionResult select(const std::vector<PromptCandidate>& candidates,
                       const std::vector<model::FunctionRecord>& dataset, const SelectionConfig& config,
                       const SampleScorer& scorer, std::size_t workers = 1);

}  // namespace binsum::prompts
