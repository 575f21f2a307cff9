#include "binsum/bench/pipeline.hpp"

#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binsum/bench/dataset.hpp"
#include "binsum/bench/report.hpp"
#include "binsum/common/parallel.hpp"
#include "binsum/common/random.hpp"
#include "binsum/common/text.hpp"
#include "binsum/llm/embeddings.hpp"

namespace binsum::bench {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kMeanRule = "mean-of-ground-truth";

std::string decompiler_of(model::RepKind rep) {
    switch (rep) {
        case model::RepKind::decompiled_ghidra: return "ghidra";
        case model::RepKind::decompiled_hexrays: return "hexrays";
        case model::RepKind::decompiled_angr: return "angr";
        default: return "-";
    }
}

ordered_json usage_json(const llm::Usage& u) {
    return {{"input", u.input_tokens}, {"output", u.output_tokens}, {"exact", u.exact}};
}

}  // namespace

WordLimitRule WordLimitRule::parse(std::string_view text) {
    auto t = trim(text);
    if (t == kMeanRule || t == "mean") return {};
    try {
        std::size_t used = 0;
        int n = std::stoi(std::string(t), &used);
        if (used == t.size() && n > 0) return {n};
    } catch (const std::exception&) {
    }
    throw ConfigError(fmt::format("word limit must be a positive integer or '{}', got '{}'", kMeanRule, text));
}

std::string WordLimitRule::to_string() const { return fixed ? std::to_string(*fixed) : std::string(kMeanRule); }

int mean_word_limit(const std::vector<model::FunctionRecord>& records) {
    if (records.empty()) throw ConfigError("cannot derive a word limit from an empty dataset");
    std::size_t total = 0;
    for (const auto& r : records) total += metrics::tokenize(r.comment).size();
    auto n = records.size();
    // round half up in integers: floor(total/n + 1/2)
    auto limit = static_cast<int>((2 * total + n) / (2 * n));
    return std::max(limit, 1);
}

void RunConfig::validate() const {
    if (dataset.empty()) throw ConfigError("no dataset given");
    if (reps.empty()) throw ConfigError("no representation selected");
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
    if (output_dir.empty()) throw ConfigError("no output directory given");
    if (mode.kind == llm::PromptMode::Kind::few_shot && mode.shots < 1)
        throw ConfigError("few-shot mode needs at least one demonstration");
    if (strip)
        for (auto r : reps)
            if (!model::is_decompiled(r))
                throw ConfigError(
                    fmt::format("symbol stripping only applies to decompiled code, not '{}'", model::to_string(r)));
    for (const auto& k : report_group_by)
        if (std::find(group_keys().begin(), group_keys().end(), k) == group_keys().end())
            throw ConfigError(fmt::format("unknown group key '{}'", k));
    params.validate();
    metric_params.validate();
}

std::string encode_score_line(const ScoreLine& l) {
    ordered_json j;
    j["record_id"] = l.record_id;
    j["project"] = l.project;
    j["arch"] = l.arch;
    j["opt"] = l.opt;
    j["rep"] = l.rep;
    j["decompiler"] = l.decompiler;
    j["model"] = l.model;
    j["mode"] = l.mode;
    j["prompt"] = l.prompt_id;
    j["strip"] = l.strip;
    j["word_limit"] = l.word_limit;
    j["summary"] = l.summary;
    j["reference"] = l.reference;
    j["scores"] = {{"semantic", l.scores.semantic},
                   {"bleu1", l.scores.bleu1},
                   {"meteor", l.scores.meteor},
                   {"rouge_l", l.scores.rouge_l}};
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ScoreLine decode_score_line(std::string_view text, std::size_t line_no) {
    ScoreLine l;
    try {
        auto j = nlohmann::json::parse(text);
        l.record_id = j.at("record_id").get<std::string>();
        l.project = j.at("project").get<std::string>();
        l.arch = j.at("arch").get<std::string>();
        l.opt = j.at("opt").get<std::string>();
        l.rep = j.at("rep").get<std::string>();
        l.decompiler = j.at("decompiler").get<std::string>();
        l.model = j.at("model").get<std::string>();
        l.mode = j.at("mode").get<std::string>();
        l.prompt_id = j.at("prompt").get<std::string>();
        l.strip = j.at("strip").get<std::string>();
        l.word_limit = j.at("word_limit").get<int>();
        l.summary = j.at("summary").get<std::string>();
        l.reference = j.at("reference").get<std::string>();
        const auto& s = j.at("scores");
        l.scores = {s.at("semantic").get<double>(), s.at("bleu1").get<double>(), s.at("meteor").get<double>(),
                    s.at("rouge_l").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("bad score line: {}", e.what()), line_no);
    }
    model::validate(l.scores);
    return l;
}

std::vector<ScoreLine> read_scores(const fs::path& path) {
    std::vector<ScoreLine> out;
    std::size_t n = 0;
    for (const auto& line : split_lines(read_file(path))) {
        ++n;
        if (!trim(line).empty()) out.push_back(decode_score_line(line, n));
    }
    return out;
}

std::shared_ptr<llm::ChatClient> make_chat_client(const std::string& model) {
    if (model == "mock") return std::make_shared<llm::MockChatModel>();
    auto endpoint = llm::EndpointConfig::from_env();
    auto key = endpoint.api_key;
    return std::make_shared<llm::OpenAiChatClient>(std::make_shared<llm::HttpTransport>(endpoint), key);
}

std::shared_ptr<metrics::EmbeddingProvider> make_embedder(const std::string& spec) {
    if (spec == "hash") return std::make_shared<metrics::HashEmbedder>();
    if (spec.rfind("hash:", 0) == 0) {
        try {
            auto dim = std::stoul(spec.substr(5));
            if (dim > 0) return std::make_shared<metrics::HashEmbedder>(dim);
        } catch (const std::exception&) {
        }
        throw ConfigError(fmt::format("bad hash embedder dimension in '{}'", spec));
    }
    if (spec.rfind("remote:", 0) == 0 && spec.size() > 7) {
        auto endpoint = llm::EndpointConfig::from_env();
        auto key = endpoint.api_key;
        return std::make_shared<llm::RemoteEmbeddingProvider>(std::make_shared<llm::HttpTransport>(endpoint), key,
                                                              spec.substr(7));
    }
    throw ConfigError(fmt::format("unknown embedder '{}' (hash, hash:<dim>, remote:<model>)", spec));
}

prompts::PromptCandidate resolve_prompt(const RunConfig& config) {
    if (!config.prompt_pool.empty()) {
        if (!fs::exists(config.prompt_pool))
            throw ConfigError(fmt::format("prompt pool {} does not exist", config.prompt_pool.string()));
        auto pool = prompts::read_pool(config.prompt_pool);
        if (pool.empty()) throw ConfigError(fmt::format("prompt pool {} is empty", config.prompt_pool.string()));
        if (!config.prompt_id.empty()) {
            for (const auto& c : pool)
                if (c.id == config.prompt_id) return c;
            throw ConfigError(fmt::format("prompt {} not in {}", config.prompt_id, config.prompt_pool.string()));
        }
        const prompts::PromptCandidate* best = &pool.front();
        for (const auto& c : pool)
            if (c.score && (!best->score || *c.score > *best->score)) best = &c;
        return *best;
    }
    if (!config.prompt_id.empty()) throw ConfigError("a prompt id needs a prompt pool");
    if (!trim(config.prompt_text).empty()) return prompts::make_candidate(config.prompt_text, prompts::Origin::human);
    return prompts::human_seed();
}

double metric_value(const model::ScoreSet& s, std::string_view metric) {
    if (metric == "semantic") return s.semantic;
    if (metric == "bleu1") return s.bleu1;
    if (metric == "meteor") return s.meteor;
    if (metric == "rouge_l") return s.rouge_l;
    throw ConfigError(fmt::format("unknown metric '{}'", metric));
}

void check_metric_name(std::string_view metric) { (void)metric_value({}, metric); }

prompts::SampleScorer make_llm_scorer(llm::Gateway& gateway, const metrics::EmbeddingProvider& embedder,
                                      const metrics::MetricParams& params, std::string metric, model::RepKind rep,
                                      int word_limit, llm::CompletionParams completion) {
    check_metric_name(metric);
    return [&gateway, &embedder, params, metric, rep, word_limit, completion](
               const prompts::PromptCandidate& c, const model::FunctionRecord& r) {
        auto it = r.reps.find(rep);
        if (it == r.reps.end())
            throw ValidationError(fmt::format("record {} has no '{}' representation", r.id, model::to_string(rep)));
        auto req = llm::assemble_request(c.text, it->second, llm::PromptMode::zero_shot(), word_limit, {},
                                         completion, model::to_string(rep));
        auto resp = gateway.complete(req);
        auto s = metrics::score_pair(embedder, params, {std::string(trim(resp.text)), r.comment});
        return metric_value(s, metric);
    };
}

RunSummary run_pipeline(const RunConfig& config, const RunEnvironment& env) {
    config.validate();
    if (!fs::exists(config.dataset))
        throw ConfigError(fmt::format("dataset {} does not exist", config.dataset.string()));
    std::vector<model::FunctionRecord> records;
    try {
        records = model::read_dataset_file(config.dataset.string());
    } catch (const Error& e) {
        throw ConfigError(fmt::format("dataset {}: {}", config.dataset.string(), e.what()));
    }
    if (records.empty()) throw ConfigError(fmt::format("dataset {} is empty", config.dataset.string()));

    auto prompt = resolve_prompt(config);
    int word_limit = config.word_limit.fixed ? *config.word_limit.fixed : mean_word_limit(records);

    auto client = env.client ? env.client : make_chat_client(config.params.model);
    auto cache = env.cache;
    if (!cache) cache = std::make_shared<llm::FileResponseCache>(config.cache_dir.value_or(config.output_dir / "cache"));
    auto embedder = env.embedder ? env.embedder : make_embedder(config.embedder);
    auto gopts = env.gateway.value_or(llm::GatewayOptions{});
    if (!env.gateway) gopts.max_in_flight = config.max_in_flight;
    llm::Gateway gateway(client, cache, gopts);

    struct Task {
        std::size_t record;
        model::RepKind rep;
    };
    RunSummary summary;
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < records.size(); ++i)
        for (auto rep : config.reps) {
            if (records[i].reps.count(rep))
                tasks.push_back({i, rep});
            else
                ++summary.skipped;
        }
    summary.tasks = tasks.size();

    std::string strip_label = config.strip ? std::string(ablation::to_string(*config.strip)) : "none";
    auto mode_label = llm::to_string(config.mode);

    std::vector<std::optional<ScoreLine>> lines(tasks.size());
    std::vector<std::optional<Failure>> failures(tasks.size());
    std::vector<llm::Usage> usage(tasks.size());
    std::mutex embed_mu;

    auto code_for = [&](const model::FunctionRecord& r, model::RepKind rep) {
        return config.strip ? strip_representation(r, rep, *config.strip) : r.reps.at(rep);
    };

    auto run_task = [&](std::size_t t) {
        const auto& rec = records[tasks[t].record];
        auto rep = tasks[t].rep;
        auto rep_name = std::string(model::to_string(rep));
        auto code = code_for(rec, rep);
        std::string text;
        if (config.mode.kind == llm::PromptMode::Kind::chain_of_thought) {
            auto cot = llm::run_cot(gateway, prompt.text, code, word_limit, config.params, rep_name);
            text = cot.summary;
            usage[t] = cot.usage;
        } else {
            std::vector<llm::Demo> demos;
            if (config.mode.kind == llm::PromptMode::Kind::few_shot) {
                // Demonstrations come from other records; never the test function itself.
                std::vector<std::size_t> pool;
                for (std::size_t k = 0; k < records.size(); ++k)
                    if (k != tasks[t].record && records[k].reps.count(rep) && records[k].reps.at(rep) != rec.reps.at(rep))
                        pool.push_back(k);
                auto shots = static_cast<std::size_t>(config.mode.shots);
                if (pool.size() < shots)
                    throw ValidationError(fmt::format("only {} demonstration candidates for {} shots", pool.size(), shots));
                SeededRng rng(derive_seed(config.seed, rec.id + "|" + rep_name));
                for (auto k : rng.sample_indices(pool.size(), shots))
                    demos.push_back({code_for(records[pool[k]], rep), records[pool[k]].comment});
            }
            auto req = llm::assemble_request(prompt.text, code, config.mode, word_limit, demos, config.params, rep_name);
            auto resp = gateway.complete(req);
            text = resp.text;
            usage[t] = resp.usage;
        }
        ScoreLine line;
        line.record_id = rec.id;
        line.project = rec.project;
        line.arch = model::to_string(rec.arch);
        line.opt = model::to_string(rec.opt_level);
        line.rep = rep_name;
        line.decompiler = decompiler_of(rep);
        line.model = config.params.model;
        line.mode = mode_label;
        line.prompt_id = prompt.id;
        line.strip = strip_label;
        line.word_limit = word_limit;
        line.summary = std::string(trim(text));
        line.reference = rec.comment;
        if (embedder->concurrent()) {
            line.scores = metrics::score_pair(*embedder, config.metric_params, {line.summary, line.reference});
        } else {
            std::lock_guard lock(embed_mu);
            line.scores = metrics::score_pair(*embedder, config.metric_params, {line.summary, line.reference});
        }
        lines[t] = std::move(line);
    };

    parallel_for(tasks.size(), config.max_in_flight, [&](std::size_t t) {
        try {
            run_task(t);
        } catch (const Error& e) {
            failures[t] = Failure{records[tasks[t].record].id, std::string(model::to_string(tasks[t].rep)),
                                  e.category(), e.what()};
        } catch (const std::exception& e) {
            failures[t] = Failure{records[tasks[t].record].id, std::string(model::to_string(tasks[t].rep)),
                                  "internal", e.what()};
        }
    });

    std::string scores_text, failures_text;
    std::vector<ScoreLine> scored;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (lines[t]) {
            scores_text += encode_score_line(*lines[t]) + "\n";
            scored.push_back(*lines[t]);
            summary.tokens.input_tokens += usage[t].input_tokens;
            summary.tokens.output_tokens += usage[t].output_tokens;
        } else {
            const auto& f = *failures[t];
            ordered_json j = {{"record_id", f.record_id}, {"rep", f.rep}, {"category", f.category}, {"message", f.message}};
            failures_text += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
        }
    }
    summary.scored = scored.size();
    summary.failed = tasks.size() - scored.size();
    summary.word_limit = word_limit;
    summary.tokens.exact = !scored.empty();
    for (std::size_t t = 0; t < tasks.size(); ++t)
        if (lines[t] && !usage[t].exact) summary.tokens.exact = false;
    summary.gateway = gateway.stats();

    fs::create_directories(config.output_dir);
    summary.scores = config.output_dir / "scores.jsonl";
    summary.failures = config.output_dir / "failures.jsonl";
    summary.manifest = config.output_dir / "manifest.json";
    summary.report_text = config.output_dir / "report.txt";
    summary.report_csv = config.output_dir / "report.csv";
    write_file_atomic(summary.scores, scores_text);
    write_file_atomic(summary.failures, failures_text);

    auto table = aggregate(scored, config.report_group_by);
    write_file_atomic(summary.report_text, render_text(table));
    write_file_atomic(summary.report_csv, render_csv(table));

    // Nothing run-specific beyond the configuration goes in here (no clock,
    // no cache statistics) so warm re-runs reproduce it byte for byte.
    ordered_json cfg;
    cfg["dataset"] = config.dataset.string();
    auto reps = ordered_json::array();
    for (auto r : config.reps) reps.push_back(model::to_string(r));
    cfg["reps"] = reps;
    cfg["model"] = config.params.model;
    cfg["temperature"] = config.params.temperature;
    cfg["top_p"] = config.params.top_p;
    cfg["n"] = config.params.n;
    cfg["mode"] = mode_label;
    cfg["prompt_id"] = prompt.id;
    cfg["prompt"] = prompt.text;
    cfg["word_limit_rule"] = config.word_limit.to_string();
    cfg["strip"] = strip_label;
    cfg["embedder"] = embedder->name();
    cfg["metric_params"] = {{"meteor_alpha", config.metric_params.meteor_alpha},
                            {"meteor_beta", config.metric_params.meteor_beta},
                            {"meteor_gamma", config.metric_params.meteor_gamma},
                            {"rouge_beta", config.metric_params.rouge_beta},
                            {"bleu_max_n", config.metric_params.bleu_max_n}};
    cfg["max_in_flight"] = config.max_in_flight;
    cfg["report_group_by"] = config.report_group_by;

    ordered_json manifest;
    manifest["config"] = cfg;
    manifest["seed"] = config.seed;
    manifest["records"] = records.size();
    manifest["tasks"] = summary.tasks;
    manifest["scored"] = summary.scored;
    manifest["failed"] = summary.failed;
    manifest["skipped"] = summary.skipped;
    manifest["word_limit"] = word_limit;
    manifest["tokenization"] = embedder->tokenization();
    manifest["tokens"] = usage_json(summary.tokens);
    write_file_atomic(summary.manifest, manifest.dump(2) + "\n");
    return summary;
}

}  // namespace binsum::bench
