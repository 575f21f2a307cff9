// binsum: command-line front end for the summarization benchmark.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binsum/bench/dataset.hpp"
#include "binsum/bench/pipeline.hpp"
#include "binsum/bench/report.hpp"
#include "binsum/common/text.hpp"

using namespace binsum;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kConfig = 2, kPartial = 3 };

// Shared LLM / gateway flags.
struct LlmFlags {
    std::string model = "mock";
    double temperature = 0.1;
    std::string cache_dir = ".binsum-cache";
    std::size_t max_in_flight = 5;
    std::string template_dir;

    void add(CLI::App* app) {
        app->add_option("--model", model, "chat model name, or 'mock'")->capture_default_str();
        app->add_option("--temperature", temperature)->capture_default_str();
        app->add_option("--cache-dir", cache_dir, "response cache directory")->capture_default_str();
        app->add_option("--max-in-flight", max_in_flight, "concurrent requests")->capture_default_str();
        app->add_option("--template-dir", template_dir, "meta-prompt templates");
    }

    llm::CompletionParams params() const {
        llm::CompletionParams p;
        p.model = model;
        p.temperature = temperature;
        p.validate();
        return p;
    }

    prompts::LabOptions lab() const {
        prompts::LabOptions o;
        o.params = params();
        if (!template_dir.empty()) o.template_dir = template_dir;
        return o;
    }

    std::unique_ptr<llm::Gateway> gateway() const {
        llm::GatewayOptions o;
        o.max_in_flight = max_in_flight;
        return std::make_unique<llm::Gateway>(bench::make_chat_client(model),
                                              std::make_shared<llm::FileResponseCache>(cache_dir), o);
    }
};

void note(const std::string& msg) { fmt::print(stderr, "{}\n", msg); }

std::vector<model::RepKind> parse_reps(const std::vector<std::string>& names) {
    std::vector<model::RepKind> out;
    for (const auto& n : names) {
        auto k = model::try_parse_rep_kind(n);
        if (!k) throw ConfigError(fmt::format("unknown representation '{}'", n));
        out.push_back(*k);
    }
    return out;
}

std::optional<model::OptLevel> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        return model::parse_opt_level(s);
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
}

std::vector<prompts::PromptCandidate> require_pool(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError(fmt::format("prompt pool {} does not exist", path));
    auto pool = prompts::read_pool(path);
    if (pool.empty()) throw ConfigError(fmt::format("prompt pool {} is empty", path));
    return pool;
}

std::vector<model::FunctionRecord> require_dataset(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError(fmt::format("dataset {} does not exist", path));
    return model::read_dataset_file(path);
}

std::string bin_func_json(const binary::BinFunc& f, const std::string& raw) {
    nlohmann::ordered_json j;
    j["name"] = f.name;
    j["low_pc"] = hex_address(f.low_pc);
    j["high_pc"] = hex_address(f.high_pc);
    j["size"] = f.high_pc - f.low_pc;
    j["arch"] = model::to_string(f.arch);
    j["opt"] = model::to_string(f.opt_level);
    j["non_contiguous"] = f.non_contiguous;
    if (!raw.empty()) j["raw_bytes"] = raw;
    return j.dump();
}

// Appends candidates whose text (case-insensitive) is not in the pool yet.
std::size_t append_unique(std::vector<prompts::PromptCandidate>& pool, std::vector<prompts::PromptCandidate> extra) {
    std::set<std::string> seen;
    for (const auto& c : pool) seen.insert(to_lower(c.text));
    std::size_t added = 0;
    for (auto& c : extra)
        if (seen.insert(to_lower(c.text)).second) {
            pool.push_back(std::move(c));
            ++added;
        }
    return added;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file_atomic(path, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"binsum - LLM binary code summarization benchmark"};
    app.set_config("--config", "", "read options from a TOML/INI file ([subcommand] sections)");
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    int exit_code = kOk;

    // parse-comments ----------------------------------------------------------
    auto* pc = app.add_subcommand("parse-comments", "harvest function/comment pairs from C sources");
    struct {
        std::string root, glob = "*.c", project, out;
        std::size_t jobs = 1;
    } pco;
    pc->add_option("--root", pco.root, "source tree")->required();
    pc->add_option("--glob", pco.glob, "file name pattern")->capture_default_str();
    pc->add_option("--project", pco.project, "project label")->required();
    pc->add_option("-o,--out", pco.out, "corpus JSONL (default stdout)");
    pc->add_option("-j,--jobs", pco.jobs)->capture_default_str();
    pc->callback([&] {
        if (!fs::is_directory(pco.root)) throw ConfigError(fmt::format("{} is not a directory", pco.root));
        auto h = comments::harvest_directory(pco.root, pco.glob, pco.jobs);
        std::string text;
        for (const auto& p : h.pairs) text += model::encode_record(comments::to_corpus_record(p, pco.project)) + "\n";
        emit(pco.out, text);
        for (const auto& w : h.warnings) note("warning: " + w);
        note(fmt::format("{} files, {} raw pairs, {} after cleaning", h.files, h.raw_pairs, h.pairs.size()));
    });

    // extract -----------------------------------------------------------------
    auto* ex = app.add_subcommand("extract", "list functions from DWARF debug info");
    struct {
        std::string binary, opt, out;
        bool bytes = false;
    } exo;
    ex->add_option("--binary", exo.binary, "ELF file")->required()->check(CLI::ExistingFile);
    ex->add_option("--opt", exo.opt, "override optimization level (O0..O3)");
    ex->add_flag("--bytes", exo.bytes, "include raw bytes");
    ex->add_option("-o,--out", exo.out, "JSONL output (default stdout)");
    ex->callback([&] {
        auto image = read_binary_file(exo.binary);
        binary::ExtractOptions opts{exo.binary, parse_opt(exo.opt)};
        binary::ExtractStats stats;
        auto funcs = binary::extract_functions(image, opts, &stats);
        std::string text;
        for (const auto& f : funcs) text += bin_func_json(f, exo.bytes ? binary::slice_raw_bytes(image, f) : "") + "\n";
        emit(exo.out, text);
        note(fmt::format("{} functions ({} subprograms, {} outside text, {} duplicates)", funcs.size(),
                         stats.subprograms, stats.outside_text, stats.duplicates));
    });

    // match -------------------------------------------------------------------
    auto* ma = app.add_subcommand("match", "join a comment corpus with binaries into a dataset");
    struct {
        std::string corpus, project, opt, out;
        std::vector<std::string> binaries;
        bool no_bytes = false, no_asm = false;
    } mao;
    ma->add_option("--corpus", mao.corpus, "corpus JSONL from parse-comments")->required()->check(CLI::ExistingFile);
    ma->add_option("--binary", mao.binaries, "ELF files (repeatable)")->required()->check(CLI::ExistingFile);
    ma->add_option("--project", mao.project)->required();
    ma->add_option("--opt", mao.opt, "override optimization level");
    ma->add_flag("--no-raw-bytes", mao.no_bytes);
    ma->add_flag("--no-assembly", mao.no_asm);
    ma->add_option("-o,--out", mao.out, "dataset JSONL (default stdout)");
    ma->callback([&] {
        std::vector<comments::SourceFunctionComment> corpus;
        for (const auto& r : model::read_dataset_file(mao.corpus)) corpus.push_back(comments::from_corpus_record(r));
        bench::BuildOptions opts;
        opts.project = mao.project;
        opts.raw_bytes = !mao.no_bytes;
        opts.assembly = !mao.no_asm;
        opts.opt_level = parse_opt(mao.opt);
        std::vector<fs::path> bins(mao.binaries.begin(), mao.binaries.end());
        bench::BuildReport report;
        auto ds = bench::build_dataset(corpus, bins, opts, &report);
        std::string text;
        for (const auto& r : ds) text += model::encode_record(r) + "\n";
        emit(mao.out, text);
        for (const auto& w : report.warnings) note("warning: " + w);
        note(fmt::format("{} matched, {} binary-only, {} source-only", report.match.matched, report.match.binary_only,
                         report.match.source_only));
    });

    // ingest ------------------------------------------------------------------
    auto* in = app.add_subcommand("ingest", "attach decompiler or IR output to dataset records");
    struct {
        std::string dataset, binary, bundle, tool = "ghidra", project, opt, out;
    } ino;
    in->add_option("--dataset", ino.dataset)->required();
    in->add_option("--binary", ino.binary, "ELF the bundle was produced from")->required()->check(CLI::ExistingFile);
    in->add_option("--bundle", ino.bundle, "directory of <function>.txt files")->required();
    in->add_option("--tool", ino.tool, "ghidra | hexrays | angr | ir")->capture_default_str();
    in->add_option("--project", ino.project)->required();
    in->add_option("--opt", ino.opt, "optimization level used when the dataset was matched");
    in->add_option("-o,--out", ino.out, "dataset JSONL (default stdout)");
    in->callback([&] {
        auto ds = require_dataset(ino.dataset);
        binary::ExternalCodeBundle::Tool tool;
        try {
            tool = binary::parse_tool(ino.tool);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        auto rep = bench::attach_external(ds, ino.binary, ino.bundle, tool, ino.project, parse_opt(ino.opt));
        std::string text;
        for (const auto& r : ds) text += model::encode_record(r) + "\n";
        emit(ino.out, text);
        for (const auto& k : rep.unresolved) note("unresolved bundle entry: " + k);
        for (const auto& k : rep.unmatched) note("no dataset record for: " + k);
        note(fmt::format("{} representations attached", rep.attached));
    });

    // strip -------------------------------------------------------------------
    auto* st = app.add_subcommand("strip", "symbol-ablate decompiled representations");
    struct {
        std::string dataset, kind = "all", out;
        std::vector<std::string> reps;
    } sto;
    st->add_option("--dataset", sto.dataset)->required();
    st->add_option("--kind", sto.kind, "func | var | type | all")->capture_default_str();
    st->add_option("--rep", sto.reps, "decompiled representations (default: all present)");
    st->add_option("-o,--out", sto.out, "dataset JSONL (default stdout)");
    st->callback([&] {
        ablation::StripKind kind;
        try {
            kind = ablation::parse_strip_kind(sto.kind);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        auto reps = parse_reps(sto.reps);
        for (auto r : reps)
            if (!model::is_decompiled(r)) throw ConfigError(fmt::format("'{}' is not decompiled code", model::to_string(r)));
        auto ds = require_dataset(sto.dataset);
        std::size_t done = 0, failed = 0;
        for (auto& rec : ds) {
            for (auto& [k, code] : rec.reps) {
                if (!model::is_decompiled(k)) continue;
                if (!reps.empty() && std::find(reps.begin(), reps.end(), k) == reps.end()) continue;
                try {
                    code = bench::strip_representation(rec, k, kind);
                    ++done;
                } catch (const Error& e) {
                    ++failed;
                    note(fmt::format("{} [{}]: {} ({})", rec.id, model::to_string(k), e.what(), e.category()));
                }
            }
        }
        std::string text;
        for (const auto& r : ds) text += model::encode_record(r) + "\n";
        emit(sto.out, text);
        note(fmt::format("{} stripped, {} failed", done, failed));
        if (failed) exit_code = kPartial;
    });

    // prompts -----------------------------------------------------------------
    auto* pr = app.add_subcommand("prompts", "build and select candidate prompts");
    pr->require_subcommand(1);
    LlmFlags pflags;

    auto* syn = pr->add_subcommand("synth", "synthesize candidate prompts");
    struct {
        int k = 10;
        std::string meta, out;
        bool no_human = false;
    } syo;
    pflags.add(syn);
    syn->add_option("-k", syo.k, "prompts to request")->capture_default_str();
    syn->add_option("--meta", syo.meta, "meta-instruction file (default: synthesize template)");
    syn->add_flag("--no-human", syo.no_human, "leave out the human-written seed prompt");
    syn->add_option("-o,--out", syo.out, "pool JSONL")->required();
    syn->callback([&] {
        auto lab = pflags.lab();
        auto meta = syo.meta.empty() ? prompts::load_template("synthesize", lab.template_dir) : read_file(syo.meta);
        auto gw = pflags.gateway();
        auto pool = prompts::synthesize(*gw, meta, syo.k, lab);
        if (!syo.no_human) pool.insert(pool.begin(), prompts::human_seed(lab));
        prompts::write_pool(syo.out, pool);
        note(fmt::format("{} candidates written", pool.size()));
    });

    auto* var = pr->add_subcommand("variants", "add paraphrases of every candidate");
    struct {
        int m = 2;
        std::string pool, out;
    } vao;
    pflags.add(var);
    var->add_option("--pool", vao.pool)->required();
    var->add_option("-m", vao.m, "variants per candidate")->capture_default_str();
    var->add_option("-o,--out", vao.out, "pool JSONL (input plus variants)")->required();
    var->callback([&] {
        auto pool = require_pool(vao.pool);
        auto gw = pflags.gateway();
        auto lab = pflags.lab();
        auto out = pool;
        for (const auto& c : pool) {
            try {
                append_unique(out, prompts::generate_variants(*gw, c, vao.m, lab));
            } catch (const prompts::EmptyPoolError& e) {
                note(fmt::format("{}: {}", c.id, e.what()));
            }
        }
        prompts::write_pool(vao.out, out);
        note(fmt::format("{} -> {} candidates", pool.size(), out.size()));
    });

    auto* opt = pr->add_subcommand("optimize", "rewrite candidates with the model as optimizer");
    struct {
        std::string pool, objective, out;
    } opo;
    pflags.add(opt);
    opt->add_option("--pool", opo.pool)->required();
    opt->add_option("--objective", opo.objective, "objective file (default: objective template)");
    opt->add_option("-o,--out", opo.out, "pool JSONL (input plus rewrites)")->required();
    opt->callback([&] {
        auto pool = require_pool(opo.pool);
        auto lab = pflags.lab();
        auto objective =
            opo.objective.empty() ? prompts::load_template("objective", lab.template_dir) : read_file(opo.objective);
        auto gw = pflags.gateway();
        auto out = pool;
        append_unique(out, prompts::optimize(*gw, pool, objective, lab));
        prompts::write_pool(opo.out, out);
        note(fmt::format("{} -> {} candidates", pool.size(), out.size()));
    });

    auto* sel = pr->add_subcommand("select", "rank candidates on a seeded dataset sample");
    struct {
        std::string pool, dataset, out, metric = "semantic", rep = "decompiled_ghidra", word_limit = "mean-of-ground-truth",
                                         embedder = "hash";
        std::size_t sample_size = 50;
        std::uint64_t seed = 0;
    } seo;
    pflags.add(sel);
    sel->add_option("--pool", seo.pool)->required();
    sel->add_option("--dataset", seo.dataset)->required();
    sel->add_option("--sample-size", seo.sample_size)->capture_default_str();
    sel->add_option("--seed", seo.seed)->capture_default_str();
    sel->add_option("--metric", seo.metric, "semantic | bleu1 | meteor | rouge_l")->capture_default_str();
    sel->add_option("--rep", seo.rep)->capture_default_str();
    sel->add_option("--word-limit", seo.word_limit)->capture_default_str();
    sel->add_option("--embedder", seo.embedder, "hash | hash:<dim> | remote:<model>")->capture_default_str();
    sel->add_option("-o,--out", seo.out, "ranked pool JSONL")->required();
    sel->callback([&] {
        auto pool = require_pool(seo.pool);
        auto ds = require_dataset(seo.dataset);
        auto rep = parse_reps({seo.rep}).front();
        auto rule = bench::WordLimitRule::parse(seo.word_limit);
        int limit = rule.fixed ? *rule.fixed : bench::mean_word_limit(ds);
        auto embedder = bench::make_embedder(seo.embedder);
        auto gw = pflags.gateway();
        auto scorer = bench::make_llm_scorer(*gw, *embedder, {}, seo.metric, rep, limit, pflags.params());
        prompts::SelectionConfig cfg{seo.sample_size, seo.seed, seo.metric};
        auto res = prompts::select(pool, ds, cfg, scorer, pflags.max_in_flight);
        prompts::write_pool(seo.out, res.ranked);
        for (const auto& c : res.ranked) note(fmt::format("{:.6f}  {}  {}", *c.score, c.id, c.text));
    });

    // run ---------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "summarize and score a dataset");
    bench::RunConfig rc;
    struct {
        std::string dataset, out = "out", pool, prompt_file, mode = "zero_shot", word_limit = "mean-of-ground-truth",
                                      strip, cache_dir, model = "mock";
        std::vector<std::string> reps = {"decompiled_ghidra"};
        std::vector<std::string> group_by = {"rep"};
        double temperature = 0.1;
    } rno;
    run->add_option("--dataset", rno.dataset)->required();
    run->add_option("--rep", rno.reps, "representations (repeatable)")->capture_default_str();
    run->add_option("--model", rno.model, "chat model name, or 'mock'")->capture_default_str();
    run->add_option("--temperature", rno.temperature)->capture_default_str();
    run->add_option("--prompt", rc.prompt_text, "prompt text");
    run->add_option("--prompt-file", rno.prompt_file, "prompt text from a file");
    run->add_option("--prompt-pool", rno.pool, "pool JSONL; best-scored candidate unless --prompt-id");
    run->add_option("--prompt-id", rc.prompt_id);
    run->add_option("--mode", rno.mode, "zero_shot | few_shot[:N] | cot")->capture_default_str();
    run->add_option("--word-limit", rno.word_limit, "N or mean-of-ground-truth")->capture_default_str();
    run->add_option("--seed", rc.seed)->capture_default_str();
    run->add_option("--strip", rno.strip, "func | var | type | all (decompiled reps only)");
    run->add_option("--embedder", rc.embedder, "hash | hash:<dim> | remote:<model>")->capture_default_str();
    run->add_option("--max-in-flight", rc.max_in_flight)->capture_default_str();
    run->add_option("--cache-dir", rno.cache_dir, "default <out>/cache");
    run->add_option("--group-by", rno.group_by, "report keys")->capture_default_str();
    run->add_option("--meteor-alpha", rc.metric_params.meteor_alpha)->capture_default_str();
    run->add_option("--meteor-beta", rc.metric_params.meteor_beta)->capture_default_str();
    run->add_option("--meteor-gamma", rc.metric_params.meteor_gamma)->capture_default_str();
    run->add_option("--rouge-beta", rc.metric_params.rouge_beta)->capture_default_str();
    run->add_option("-o,--out", rno.out, "output directory")->capture_default_str();
    run->callback([&] {
        rc.dataset = rno.dataset;
        rc.reps = parse_reps(rno.reps);
        rc.params.model = rno.model;
        rc.params.temperature = rno.temperature;
        if (!rno.prompt_file.empty()) rc.prompt_text = read_file(rno.prompt_file);
        rc.prompt_pool = rno.pool;
        try {
            rc.mode = llm::parse_prompt_mode(rno.mode);
            if (!rno.strip.empty()) rc.strip = ablation::parse_strip_kind(rno.strip);
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
        rc.word_limit = bench::WordLimitRule::parse(rno.word_limit);
        if (!rno.cache_dir.empty()) rc.cache_dir = rno.cache_dir;
        rc.output_dir = rno.out;
        rc.report_group_by = rno.group_by;
        auto s = bench::run_pipeline(rc);
        std::cout << read_file(s.report_text);
        note(fmt::format("{} scored, {} failed, {} skipped; N = {} words; tokens in/out {}/{}; cache hits {}",
                         s.scored, s.failed, s.skipped, s.word_limit, s.tokens.input_tokens, s.tokens.output_tokens,
                         s.gateway.cache_hits));
        note(fmt::format("scores: {}", s.scores.string()));
        if (s.partial()) {
            note(fmt::format("failures: {}", s.failures.string()));
            exit_code = kPartial;
        }
    });

    // score -------------------------------------------------------------------
    auto* sc = app.add_subcommand("score", "score generated summaries against references");
    struct {
        std::string input, out, embedder = "hash";
    } sco;
    metrics::MetricParams sparams;
    sc->add_option("--input", sco.input, "JSONL with 'generated' and 'reference' fields")->required()->check(CLI::ExistingFile);
    sc->add_option("--embedder", sco.embedder)->capture_default_str();
    sc->add_option("--meteor-alpha", sparams.meteor_alpha)->capture_default_str();
    sc->add_option("--meteor-beta", sparams.meteor_beta)->capture_default_str();
    sc->add_option("--meteor-gamma", sparams.meteor_gamma)->capture_default_str();
    sc->add_option("--rouge-beta", sparams.rouge_beta)->capture_default_str();
    sc->add_option("-o,--out", sco.out, "JSONL output (default stdout)");
    sc->callback([&] {
        sparams.validate();
        auto embedder = bench::make_embedder(sco.embedder);
        std::string text;
        std::size_t n = 0, failed = 0;
        for (const auto& line : split_lines(read_file(sco.input))) {
            ++n;
            if (trim(line).empty()) continue;
            nlohmann::ordered_json j;
            try {
                j = nlohmann::ordered_json::parse(line);
                model::SummaryPair pair{j.at("generated").get<std::string>(), j.at("reference").get<std::string>()};
                auto s = metrics::score_pair(*embedder, sparams, pair);
                j["scores"] = {{"semantic", s.semantic}, {"bleu1", s.bleu1}, {"meteor", s.meteor}, {"rouge_l", s.rouge_l}};
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(e.what(), n);
            } catch (const Error& e) {
                ++failed;
                note(fmt::format("line {}: {} ({})", n, e.what(), e.category()));
                continue;
            }
            text += j.dump() + "\n";
        }
        emit(sco.out, text);
        if (failed) exit_code = kPartial;
    });

    // report ------------------------------------------------------------------
    auto* rp = app.add_subcommand("report", "aggregate a score file");
    struct {
        std::string scores, csv, text;
        std::vector<std::string> group_by;
    } rpo;
    rp->add_option("--scores", rpo.scores, "scores.jsonl from run")->required()->check(CLI::ExistingFile);
    rp->add_option("--group-by", rpo.group_by, "keys: rep model arch opt decompiler mode strip project prompt")
        ->delimiter(',');
    rp->add_option("--csv", rpo.csv, "write CSV here");
    rp->add_option("--text", rpo.text, "write the text table here instead of stdout");
    rp->callback([&] {
        auto table = bench::aggregate_file(rpo.scores, rpo.group_by);
        emit(rpo.text, bench::render_text(table));
        if (!rpo.csv.empty()) write_file_atomic(rpo.csv, bench::render_csv(table));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        auto code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    } catch (const ConfigError& e) {
        note(fmt::format("config error: {}", e.what()));
        return kConfig;
    } catch (const Error& e) {
        note(fmt::format("error ({}): {}", e.category(), e.what()));
        return kRuntime;
    } catch (const std::exception& e) {
        note(fmt::format("error: {}", e.what()));
        return kRuntime;
    }
    return exit_code;
}
