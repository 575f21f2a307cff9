#include "binsum/llm/request.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binsum/common/hash.hpp"
#include "binsum/common/text.hpp"

namespace binsum::llm {

void CompletionParams::validate() const {
    if (model.empty()) throw ConfigError("model name is empty");
    if (!(temperature >= 0.0) || !std::isfinite(temperature))
        throw ConfigError(fmt::format("temperature must be >= 0, got {}", temperature));
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError(fmt::format("top_p must be in (0, 1], got {}", top_p));
    if (n < 1) throw ConfigError(fmt::format("n must be positive, got {}", n));
    if (max_tokens && *max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

PromptMode parse_prompt_mode(std::string_view text) {
    auto t = to_lower(trim(text));
    if (t == "zero_shot" || t == "zero-shot" || t == "zero") return PromptMode::zero_shot();
    if (t == "cot" || t == "chain_of_thought" || t == "chain-of-thought") return PromptMode::chain_of_thought();
    for (std::string_view prefix : {"few_shot", "few-shot"}) {
        if (t.rfind(prefix, 0) != 0) continue;
        auto rest = std::string_view(t).substr(prefix.size());
        if (rest.empty()) return PromptMode::few_shot();
        if (rest[0] == ':' || rest[0] == '=') {
            try {
                std::size_t used = 0;
                int shots = std::stoi(std::string(rest.substr(1)), &used);
                if (used == rest.size() - 1 && shots > 0) return PromptMode::few_shot(shots);
            } catch (const std::exception&) {
            }
        }
    }
    throw ConfigError(fmt::format("unknown prompt mode '{}' (zero_shot, few_shot[:N], cot)", text));
}

std::string to_string(const PromptMode& mode) {
    switch (mode.kind) {
        case PromptMode::Kind::zero_shot: return "zero_shot";
        case PromptMode::Kind::few_shot: return mode.shots == 2 ? "few_shot" : fmt::format("few_shot:{}", mode.shots);
        case PromptMode::Kind::chain_of_thought: return "cot";
    }
    return "?";
}

std::string compute_cache_key(const Request& r) {
    nlohmann::json j;  // std::map-backed: keys serialize sorted
    j["instruction"] = r.instruction;
    j["body"] = r.body;
    j["mode"] = to_string(r.mode);
    j["model"] = r.params.model;
    j["temperature"] = r.params.temperature;
    j["top_p"] = r.params.top_p;
    j["n"] = r.params.n;
    j["max_tokens"] = r.params.max_tokens ? nlohmann::json(*r.params.max_tokens) : nlohmann::json(nullptr);
    return sha256_hex(j.dump());
}

std::string rep_label(std::string_view rep_kind) {
    if (rep_kind == "raw_bytes") return "raw bytes";
    if (rep_kind == "assembly") return "assembly";
    if (rep_kind == "ir") return "IR";
    if (rep_kind == "source") return "source";
    if (rep_kind.rfind("decompiled", 0) == 0) return "decompiled";
    return std::string(rep_kind);
}

std::string instruction_with_limit(std::string_view prompt, int word_limit) {
    if (word_limit < 1) throw ValidationError("word limit must be positive");
    auto text = std::string(trim(prompt));
    if (text.empty()) throw ValidationError("prompt is empty");
    const std::string placeholder = "{word_limit}";
    if (auto pos = text.find(placeholder); pos != std::string::npos) {
        do {
            text.replace(pos, placeholder.size(), std::to_string(word_limit));
            pos = text.find(placeholder, pos);
        } while (pos != std::string::npos);
        return text;
    }
    return fmt::format("{} Summarize the function in {} words.", text, word_limit);
}

namespace {

std::string code_section(std::string_view rep, std::string_view code) {
    return fmt::format("Input {} code:\n{}\n", rep_label(rep), trim(code));
}

Request finish(Request r) {
    r.cache_key = compute_cache_key(r);
    return r;
}

}  // namespace

Request assemble_request(std::string_view prompt, std::string_view code, const PromptMode& mode, int word_limit,
                         const std::vector<Demo>& demos, const CompletionParams& params, std::string_view rep) {
    params.validate();
    if (trim(code).empty()) throw ValidationError("input code is empty");
    if (mode.kind == PromptMode::Kind::few_shot) {
        if (mode.shots < 1) throw ValidationError("few-shot mode needs at least one shot");
        if (demos.size() != static_cast<std::size_t>(mode.shots))
            throw ValidationError(fmt::format("few-shot mode expects {} demos, got {}", mode.shots, demos.size()));
    } else if (!demos.empty()) {
        throw ValidationError(fmt::format("{} mode takes no demos", to_string(mode)));
    }

    Request r;
    r.mode = mode;
    r.params = params;
    r.instruction = instruction_with_limit(prompt, word_limit);
    std::string body = r.instruction + "\n\n";
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto& d = demos[i];
        if (trim(d.code) == trim(code))
            throw LeakageError(fmt::format("demo {} is the test input itself", i + 1));
        body += code_section(rep, d.code);
        body += fmt::format("Function Summary: {}\n\n", trim(d.summary));
    }
    body += code_section(rep, code);
    body += "Function Summary:";
    r.body = std::move(body);
    return finish(std::move(r));
}

Request assemble_cot_explanation(std::string_view prompt, std::string_view code, const CompletionParams& params,
                                 std::string_view rep) {
    params.validate();
    if (trim(code).empty()) throw ValidationError("input code is empty");
    Request r;
    r.mode = PromptMode::chain_of_thought();
    r.params = params;
    r.instruction = std::string(trim(prompt));
    r.body = fmt::format("{}\n\n{}Explain what this function does. {}", r.instruction, code_section(rep, code),
                         kCotTrigger);
    return finish(std::move(r));
}

Request assemble_cot_summary(std::string_view prompt, std::string_view code, std::string_view explanation,
                             int word_limit, const CompletionParams& params, std::string_view rep) {
    params.validate();
    Request r;
    r.mode = PromptMode::chain_of_thought();
    r.params = params;
    r.instruction = instruction_with_limit(prompt, word_limit);
    r.body = fmt::format("{}\n\n{}Explanation:\n{}\n\nFunction Summary:", r.instruction, code_section(rep, code),
                         trim(explanation));
    return finish(std::move(r));
}

Request plain_request(std::string_view text, const CompletionParams& params) {
    params.validate();
    if (trim(text).empty()) throw ValidationError("query text is empty");
    Request r;
    r.params = params;
    r.instruction = std::string(trim(text));
    r.body = r.instruction;
    return finish(std::move(r));
}

std::size_t count_tokens(std::string_view text) { return (text.size() + 3) / 4; }

}  // namespace binsum::llm
