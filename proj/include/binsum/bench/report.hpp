#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "binsum/bench/pipeline.hpp"

namespace binsum::bench {

// rep, model, arch, opt, decompiler, mode, strip, project, prompt
const std::vector<std::string>& group_keys();

inline constexpr std::array<std::string_view, 4> kMetricNames = {"semantic", "bleu1", "meteor", "rouge_l"};

struct MetricSummary {
    double mean = 0.0;
    double median = 0.0;
};

struct ReportRow {
    std::vector<std::string> key;  // one value per group_by entry
    std::size_t count = 0;
    std::array<MetricSummary, 4> metrics;  // kMetricNames order
};

struct ReportTable {
    std::vector<std::string> group_by;
    std::vector<ReportRow> rows;  // sorted by key
    std::size_t total = 0;
};

// Throws ConfigError for an unknown key.
ReportTable aggregate(const std::vector<ScoreLine>& lines, const std::vector<std::string>& group_by);
ReportTable aggregate_file(const std::filesystem::path& scores, const std::vector<std::string>& group_by);

std::string render_text(const ReportTable& table);
std::string render_csv(const ReportTable& table);

}  // namespace binsum::bench
