#include "binsum/bench/dataset.hpp"

#include <map>

#include <fmt/format.h>

#include "binsum/binary/disasm.hpp"
#include "binsum/binary/elf.hpp"
#include "binsum/common/text.hpp"

namespace binsum::bench {

namespace fs = std::filesystem;

std::vector<model::FunctionRecord> build_dataset(const std::vector<comments::SourceFunctionComment>& corpus,
                                                 const std::vector<fs::path>& binaries, const BuildOptions& options,
                                                 BuildReport* report) {
    BuildReport local;
    auto& rep = report ? *report : local;
    std::vector<model::FunctionRecord> out;

    for (const auto& path : binaries) {
        auto image = read_binary_file(path);
        binary::ExtractOptions eo;
        eo.binary_path = path.string();
        eo.opt_level = options.opt_level;
        auto funcs = binary::extract_functions(image, eo);

        binary::MatchReport mr;
        auto records = binary::match_source_binary(corpus, funcs, options.project, &mr);
        rep.match.matched += mr.matched;
        rep.match.binary_only += mr.binary_only;
        rep.match.source_only += mr.source_only;
        rep.match.non_contiguous.insert(rep.match.non_contiguous.end(), mr.non_contiguous.begin(),
                                        mr.non_contiguous.end());
        rep.match.duplicate_names.insert(rep.match.duplicate_names.end(), mr.duplicate_names.begin(),
                                         mr.duplicate_names.end());

        std::map<std::string, const binary::BinFunc*> by_name;
        for (const auto& f : funcs) by_name.emplace(f.name, &f);

        std::unique_ptr<binary::DisassemblerAdapter> disasm;
        if (options.assembly && !records.empty()) {
            disasm = binary::default_disassembler(records.front().arch);
            if (!disasm)
                rep.warnings.push_back(fmt::format("{}: no disassembler for {}, assembly skipped", path.string(),
                                                   model::to_string(records.front().arch)));
        }

        for (auto& r : records) {
            const auto& f = *by_name.at(r.name);
            if (options.raw_bytes) r.reps[model::RepKind::raw_bytes] = binary::slice_raw_bytes(image, f);
            if (disasm) {
                auto d = binary::disassemble_function(*disasm, image, f);
                if (d.complete() && !d.text.empty())
                    r.reps[model::RepKind::assembly] = d.text;
                else
                    for (const auto& w : d.warnings) rep.warnings.push_back(fmt::format("{}: {}", r.id, w));
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

AttachReport attach_external(std::vector<model::FunctionRecord>& dataset, const fs::path& binary_path,
                             const fs::path& bundle_dir, binary::ExternalCodeBundle::Tool tool,
                             const std::string& project, std::optional<model::OptLevel> opt_level) {
    auto image = read_binary_file(binary_path);
    binary::ExtractOptions eo;
    eo.binary_path = binary_path.string();
    eo.opt_level = opt_level;
    auto funcs = binary::extract_functions(image, eo);
    auto bundle = binary::load_bundle(bundle_dir, tool);
    auto ingest = binary::ingest_external(bundle, funcs);

    std::map<std::string, model::FunctionRecord*> by_id;
    for (auto& r : dataset) by_id.emplace(r.id, &r);

    AttachReport out;
    out.unresolved = ingest.unresolved;
    auto kind = binary::rep_kind_for(tool);
    for (const auto& [idx, code] : ingest.attached) {
        auto id = binary::record_id(project, funcs[idx]);
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            out.unmatched.push_back(funcs[idx].name);
            continue;
        }
        it->second->reps[kind] = code;
        ++out.attached;
    }
    return out;
}

std::string strip_representation(const model::FunctionRecord& record, model::RepKind rep, ablation::StripKind kind) {
    if (!model::is_decompiled(rep))
        throw ConfigError(fmt::format("symbol stripping applies to decompiled code, not '{}'", model::to_string(rep)));
    const auto& code = record.reps.at(rep);
    auto table = ablation::infer_symbol_table(code, record.name, record.low_pc);
    return ablation::strip(code, table, kind);
}

}  // namespace binsum::bench
