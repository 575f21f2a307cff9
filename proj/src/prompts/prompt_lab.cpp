#include "binsum/prompts/prompt_lab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binsum/common/hash.hpp"
#include "binsum/common/parallel.hpp"
#include "binsum/common/random.hpp"
#include "binsum/common/text.hpp"

#ifndef BINSUM_TEMPLATE_DIR
#define BINSUM_TEMPLATE_DIR "share/templates"
#endif

namespace binsum::prompts {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view to_string(Origin origin) {
    switch (origin) {
        case Origin::human: return "human";
        case Origin::synthesized: return "synthesized";
        case Origin::variant: return "variant";
        case Origin::optimized: return "optimized";
    }
    return "?";
}

Origin parse_origin(std::string_view text) {
    for (auto o : {Origin::human, Origin::synthesized, Origin::variant, Origin::optimized})
        if (to_string(o) == text) return o;
    throw ValidationError(fmt::format("unknown prompt origin '{}'", text));
}

PromptCandidate make_candidate(std::string text, Origin origin, std::optional<std::string> parent_id) {
    PromptCandidate c;
    c.text = std::string(trim(text));
    c.origin = origin;
    c.parent_id = std::move(parent_id);
    auto digest = sha256_hex(fmt::format("{}\n{}\n{}", to_string(origin), c.parent_id.value_or(""), c.text));
    c.id = fmt::format("{}-{}", to_string(origin)[0], digest.substr(0, 12));
    validate(c);
    return c;
}

void validate(const PromptCandidate& c) {
    if (c.id.empty()) throw ValidationError("prompt candidate has an empty id");
    if (trim(c.text).empty()) throw ValidationError(fmt::format("prompt {} has empty text", c.id));
    if ((c.origin == Origin::variant || c.origin == Origin::optimized) && !c.parent_id)
        throw ValidationError(fmt::format("{} prompt {} has no parent", to_string(c.origin), c.id));
    if (c.score && !(*c.score >= -1.0 && *c.score <= 1.0))
        throw ValidationError(fmt::format("prompt {} score {} outside [-1, 1]", c.id, *c.score));
}

std::string encode_candidate(const PromptCandidate& c) {
    ordered_json j;
    j["id"] = c.id;
    j["text"] = c.text;
    j["origin"] = to_string(c.origin);
    j["parent"] = c.parent_id ? ordered_json(*c.parent_id) : ordered_json(nullptr);
    j["score"] = c.score ? ordered_json(*c.score) : ordered_json(nullptr);
    return j.dump();
}

PromptCandidate decode_candidate(std::string_view line, std::size_t line_no) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
        throw ParseError(fmt::format("invalid JSON: {}", e.what()), line_no);
    }
    PromptCandidate c;
    try {
        c.id = j.at("id").get<std::string>();
        c.text = j.at("text").get<std::string>();
        c.origin = parse_origin(j.at("origin").get<std::string>());
        if (j.contains("parent") && !j["parent"].is_null()) c.parent_id = j["parent"].get<std::string>();
        if (j.contains("score") && !j["score"].is_null()) c.score = j["score"].get<double>();
    } catch (const ordered_json::exception& e) {
        throw ParseError(fmt::format("bad prompt entry: {}", e.what()), line_no);
    }
    validate(c);
    return c;
}

std::vector<PromptCandidate> read_pool(const fs::path& path) {
    std::vector<PromptCandidate> out;
    std::set<std::string> ids;
    std::size_t n = 0;
    for (const auto& line : split_lines(read_file(path))) {
        ++n;
        if (trim(line).empty()) continue;
        auto c = decode_candidate(line, n);
        if (!ids.insert(c.id).second) throw ValidationError(fmt::format("line {}: duplicate prompt id {}", n, c.id));
        out.push_back(std::move(c));
    }
    return out;
}

void write_pool(const fs::path& path, const std::vector<PromptCandidate>& pool) {
    std::string text;
    for (const auto& c : pool) text += encode_candidate(c) + "\n";
    write_file_atomic(path, text);
}

fs::path template_dir() {
    if (const char* env = std::getenv("BINSUM_TEMPLATE_DIR"); env && *env) return env;
    return BINSUM_TEMPLATE_DIR;
}

std::string load_template(std::string_view name, const std::optional<fs::path>& dir) {
    auto path = dir.value_or(template_dir()) / (std::string(name) + ".txt");
    try {
        return std::string(trim(read_file(path)));
    } catch (const IoError&) {
        throw ConfigError(fmt::format("prompt template '{}' not found at {}", name, path.string()));
    }
}

std::string fill_template(std::string_view text, const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out(text);
    for (const auto& [key, value] : values) {
        auto placeholder = "{" + key + "}";
        for (auto pos = out.find(placeholder); pos != std::string::npos; pos = out.find(placeholder, pos + value.size()))
            out.replace(pos, placeholder.size(), value);
    }
    return out;
}

std::vector<std::string> parse_prompt_list(std::string_view llm_output) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& raw : split_lines(llm_output)) {
        std::string_view line = trim(raw);
        // "1.", "1)", "12 -", "Prompt 3:" style markers
        if (line.size() > 7 && to_lower(line.substr(0, 7)) == "prompt ") {
            auto rest = line.substr(7);
            auto d = rest.find_first_not_of("0123456789");
            if (d != 0 && d != std::string_view::npos && rest[d] == ':') line = trim(rest.substr(d + 1));
        }
        auto digits = line.find_first_not_of("0123456789");
        if (digits != 0 && digits != std::string_view::npos && (line[digits] == '.' || line[digits] == ')'))
            line = trim(line.substr(digits + 1));
        if (!line.empty() && (line[0] == '-' || line[0] == '*' || line[0] == '#')) line = trim(line.substr(1));
        if (line.size() >= 2 && ((line.front() == '"' && line.back() == '"') ||
                                 (line.front() == '\'' && line.back() == '\'')))
            line = trim(line.substr(1, line.size() - 2));
        if (line.empty()) continue;
        if (seen.insert(to_lower(line)).second) out.emplace_back(line);
    }
    return out;
}

namespace {

std::string query(llm::Gateway& gateway, const std::string& text, const LabOptions& options) {
    return gateway.complete(llm::plain_request(text, options.params)).text;
}

}  // namespace

std::vector<PromptCandidate> synthesize(llm::Gateway& gateway, std::string_view meta_instruction, int k,
                                        const LabOptions& options) {
    if (k < 1) throw ConfigError("k must be positive");
    auto text = fill_template(meta_instruction, {{"k", std::to_string(k)}});
    auto lines = parse_prompt_list(query(gateway, text, options));
    if (lines.empty()) throw EmptyPoolError("the model returned no parseable prompts");
    if (lines.size() > static_cast<std::size_t>(k)) lines.resize(static_cast<std::size_t>(k));
    std::vector<PromptCandidate> out;
    for (auto& l : lines) out.push_back(make_candidate(std::move(l), Origin::synthesized));
    return out;
}

std::vector<PromptCandidate> generate_variants(llm::Gateway& gateway, const PromptCandidate& candidate, int m,
                                               const LabOptions& options) {
    if (m < 1) throw ConfigError("m must be positive");
    auto text = fill_template(load_template("variants", options.template_dir),
                              {{"prompt", candidate.text}, {"m", std::to_string(m)}});
    auto lines = parse_prompt_list(query(gateway, text, options));
    std::vector<PromptCandidate> out;
    for (auto& l : lines) {
        if (out.size() == static_cast<std::size_t>(m)) break;
        if (l == trim(candidate.text)) continue;
        out.push_back(make_candidate(std::move(l), Origin::variant, candidate.id));
    }
    if (out.empty()) throw EmptyPoolError(fmt::format("no usable variants of {}", candidate.id));
    return out;
}

std::vector<PromptCandidate> optimize(llm::Gateway& gateway, const std::vector<PromptCandidate>& candidates,
                                      std::string_view meta_objective, const LabOptions& options) {
    auto tmpl = load_template("optimize", options.template_dir);
    std::vector<PromptCandidate> out;
    for (const auto& c : candidates) {
        auto text = fill_template(tmpl, {{"prompt", c.text}, {"objective", std::string(trim(meta_objective))}});
        auto lines = parse_prompt_list(query(gateway, text, options));
        if (lines.empty() || lines.front() == trim(c.text)) continue;  // top-1 only
        out.push_back(make_candidate(lines.front(), Origin::optimized, c.id));
    }
    if (out.empty() && !candidates.empty()) throw EmptyPoolError("the optimizer produced no rewritten prompts");
    return out;
}

PromptCandidate human_seed(const LabOptions& options) {
    return make_candidate(load_template("human_seed", options.template_dir), Origin::human);
}

SelectionResult select(const std::vector<PromptCandidate>& candidates,
                       const std::vector<model::FunctionRecord>& dataset, const SelectionConfig& config,
                       const SampleScorer& scorer, std::size_t workers) {
    if (dataset.empty()) throw SelectionError("cannot select prompts over an empty dataset");
    if (candidates.empty()) throw SelectionError("no prompt candidates to select from");
    if (config.sample_size == 0) throw ConfigError("sample size must be positive");
    if (config.sample_size > dataset.size())
        throw ConfigError(fmt::format("sample size {} exceeds dataset size {}", config.sample_size, dataset.size()));
    {
        std::set<std::string> ids;
        for (const auto& c : candidates)
            if (!ids.insert(c.id).second) throw SelectionError(fmt::format("duplicate candidate id {}", c.id));
    }

    SeededRng rng(config.seed);
    auto sample = rng.sample_indices(dataset.size(), config.sample_size);

    // Candidates are scored in id order so evaluation order (and any cache
    // traffic) does not depend on the input permutation.
    std::vector<PromptCandidate> ordered = candidates;
    std::sort(ordered.begin(), ordered.end(),
              [](const PromptCandidate& a, const PromptCandidate& b) { return a.id < b.id; });

    std::vector<std::vector<double>> values(ordered.size(), std::vector<double>(sample.size()));
    parallel_for(ordered.size() * sample.size(), workers, [&](std::size_t k) {
        auto ci = k / sample.size();
        auto si = k % sample.size();
        values[ci][si] = scorer(ordered[ci], dataset[sample[si]]);
    });
    for (std::size_t ci = 0; ci < ordered.size(); ++ci) {
        double sum = 0.0;
        for (double v : values[ci]) sum += v;
        ordered[ci].score = sum / static_cast<double>(sample.size());
    }

    std::vector<std::size_t> rank(ordered.size());
    for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
        if (*ordered[a].score != *ordered[b].score) return *ordered[a].score > *ordered[b].score;
        return ordered[a].id < ordered[b].id;
    });

    SelectionResult result;
    for (auto i : rank) {
        result.ranked.push_back(ordered[i]);
        result.per_sample.push_back(values[i]);
    }
    for (auto s : sample) result.sample_ids.push_back(dataset[s].id);
    return result;
}

}  // namespace binsum::prompts
