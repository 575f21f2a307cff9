#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "binsum/ablation/strip.hpp"
#include "binsum/llm/gateway.hpp"
#include "binsum/metrics/metrics.hpp"
#include "binsum/model/record.hpp"
#include "binsum/prompts/prompt_lab.hpp"

namespace binsum::bench {

// Either a fixed N or the mean ground-truth length.
struct WordLimitRule {
    std::optional<int> fixed;

    static WordLimitRule parse(std::string_view text);  // "mean-of-ground-truth" or a positive integer
    [[nodiscard]] std::string to_string() const;
};

// Mean token count of the comments, rounded half up.
int mean_word_limit(const std::vector<model::FunctionRecord>& records);

struct RunConfig {
    std::filesystem::path dataset;
    std::vector<model::RepKind> reps = {model::RepKind::decompiled_ghidra};
    llm::CompletionParams params;  // params.model: "mock" or a chat model name
    // Prompt resolution: pool (+id, else best score, else first) > text > human seed.
    std::string prompt_text;
    std::filesystem::path prompt_pool;
    std::string prompt_id;
    llm::PromptMode mode;
    WordLimitRule word_limit;
    metrics::MetricParams metric_params;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> cache_dir;  // default <output_dir>/cache
    std::optional<ablation::StripKind> strip;         // applied to decompiled reps
    std::string embedder = "hash";                    // hash | hash:<dim> | remote:<model>
    std::size_t max_in_flight = 5;
    std::vector<std::string> report_group_by = {"rep"};

    void validate() const;  // throws ConfigError
};

struct ScoreLine {
    std::string record_id;
    std::string project;
    std::string arch;
    std::string opt;
    std::string rep;
    std::string decompiler;  // ghidra/hexrays/angr or "-"
    std::string model;
    std::string mode;
    std::string prompt_id;
    std::string strip;  // none/func/var/type/all
    int word_limit = 0;
    std::string summary;
    std::string reference;
    model::ScoreSet scores;

    bool operator==(const ScoreLine&) const = default;
};

std::string encode_score_line(const ScoreLine& line);
ScoreLine decode_score_line(std::string_view text, std::size_t line_no = 0);
std::vector<ScoreLine> read_scores(const std::filesystem::path& path);

struct Failure {
    std::string record_id;
    std::string rep;
    std::string category;
    std::string message;
};

struct RunSummary {
    std::filesystem::path scores;
    std::filesystem::path failures;
    std::filesystem::path manifest;
    std::filesystem::path report_text;
    std::filesystem::path report_csv;
    std::size_t tasks = 0;
    std::size_t scored = 0;
    std::size_t failed = 0;
    std::size_t skipped = 0;  // records without the requested representation
    int word_limit = 0;
    llm::Usage tokens;
    llm::GatewayStats gateway;

    [[nodiscard]] bool partial() const { return failed > 0; }
};

// Pieces a caller may inject; anything left null is built from the config.
struct RunEnvironment {
    std::shared_ptr<llm::ChatClient> client;
    std::shared_ptr<llm::ResponseCache> cache;
    std::shared_ptr<metrics::EmbeddingProvider> embedder;
    std::optional<llm::GatewayOptions> gateway;
};

// "mock" -> MockChatModel, anything else -> OpenAI-style client configured
// from BINSUM_API_BASE / BINSUM_API_KEY.
std::shared_ptr<llm::ChatClient> make_chat_client(const std::string& model);
std::shared_ptr<metrics::EmbeddingProvider> make_embedder(const std::string& spec);

// Resolves the run's prompt per RunConfig's rules.
prompts::PromptCandidate resolve_prompt(const RunConfig& config);

// Summarizes and scores every record x representation, then writes
// scores.jsonl (dataset order x rep order), failures.jsonl, manifest.json and
// report.{txt,csv}. Per-record errors become failure lines; config errors throw.
RunSummary run_pipeline(const RunConfig& config, const RunEnvironment& env = {});

// "semantic" | "bleu1" | "meteor" | "rouge_l"
double metric_value(const model::ScoreSet& scores, std::string_view metric);
void check_metric_name(std::string_view metric);

// Selection scorer: zero-shot summary of `rep` under the candidate prompt,
// scored against the record's comment with `metric`.
prompts::SampleScorer make_llm_scorer(llm::Gateway& gateway, const metrics::EmbeddingProvider& embedder,
                                      const metrics::MetricParams& params, std::string metric, model::RepKind rep,
                                      int word_limit, llm::CompletionParams completion = {});

}  // namespace binsum::bench
