#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "binsum/ablation/strip.hpp"
#include "binsum/binary/extract.hpp"
#include "binsum/comments/extract.hpp"
#include "binsum/model/record.hpp"

namespace binsum::bench {

struct BuildOptions {
    std::string project;
    bool raw_bytes = true;
    bool assembly = true;
    std::optional<model::OptLevel> opt_level;  // overrides DW_AT_producer
};

struct BuildReport {
    binary::MatchReport match;  // summed over binaries
    std::vector<std::string> warnings;
};

// Extracts functions from each binary, joins them with the comment corpus by
// name and attaches the machine-level representations.
std::vector<model::FunctionRecord> build_dataset(const std::vector<comments::SourceFunctionComment>& corpus,
                                                 const std::vector<std::filesystem::path>& binaries,
                                                 const BuildOptions& options, BuildReport* report = nullptr);

struct AttachReport {
    std::size_t attached = 0;
    std::vector<std::string> unresolved;  // bundle keys with no function in the binary
    std::vector<std::string> unmatched;   // functions with code but no dataset record
};

// Adds decompiler / IR output from a bundle directory to the records that
// came from `binary`.
AttachReport attach_external(std::vector<model::FunctionRecord>& dataset, const std::filesystem::path& binary,
                             const std::filesystem::path& bundle_dir, binary::ExternalCodeBundle::Tool tool,
                             const std::string& project, std::optional<model::OptLevel> opt_level = {});

// Symbol-ablated copy of a decompiled representation, table inferred from the
// code. Throws whatever strip throws.
std::string strip_representation(const model::FunctionRecord& record, model::RepKind rep, ablation::StripKind kind);

}  // namespace binsum::bench
