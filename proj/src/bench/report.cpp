#include "binsum/bench/report.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace binsum::bench {

const std::vector<std::string>& group_keys() {
    static const std::vector<std::string> keys = {"rep",  "model", "arch",    "opt",   "decompiler",
                                                  "mode", "strip", "project", "prompt"};
    return keys;
}

namespace {

const std::string& field(const ScoreLine& l, const std::string& key) {
    if (key == "rep") return l.rep;
    if (key == "model") return l.model;
    if (key == "arch") return l.arch;
    if (key == "opt") return l.opt;
    if (key == "decompiler") return l.decompiler;
    if (key == "mode") return l.mode;
    if (key == "strip") return l.strip;
    if (key == "project") return l.project;
    return l.prompt_id;
}

MetricSummary summarize(std::vector<double> v) {
    MetricSummary s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    auto n = v.size();
    s.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    return s;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

ReportTable aggregate(const std::vector<ScoreLine>& lines, const std::vector<std::string>& group_by) {
    for (const auto& k : group_by)
        if (std::find(group_keys().begin(), group_keys().end(), k) == group_keys().end())
            throw ConfigError(fmt::format("unknown group key '{}'", k));

    std::map<std::vector<std::string>, std::array<std::vector<double>, 4>> groups;
    for (const auto& l : lines) {
        std::vector<std::string> key;
        for (const auto& k : group_by) key.push_back(field(l, k));
        auto& g = groups[key];
        g[0].push_back(l.scores.semantic);
        g[1].push_back(l.scores.bleu1);
        g[2].push_back(l.scores.meteor);
        g[3].push_back(l.scores.rouge_l);
    }

    ReportTable table;
    table.group_by = group_by;
    table.total = lines.size();
    for (auto& [key, values] : groups) {
        ReportRow row;
        row.key = key;
        row.count = values[0].size();
        for (std::size_t m = 0; m < 4; ++m) row.metrics[m] = summarize(values[m]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

ReportTable aggregate_file(const std::filesystem::path& scores, const std::vector<std::string>& group_by) {
    return aggregate(read_scores(scores), group_by);
}

std::string render_text(const ReportTable& table) {
    std::vector<std::string> header = table.group_by;
    if (header.empty()) header.push_back("group");
    header.push_back("count");
    for (auto m : kMetricNames) {
        header.push_back(fmt::format("{}_mean", m));
        header.push_back(fmt::format("{}_median", m));
    }
    std::vector<std::vector<std::string>> cells = {header};
    for (const auto& row : table.rows) {
        std::vector<std::string> c = row.key;
        if (table.group_by.empty()) c.push_back("all");
        c.push_back(std::to_string(row.count));
        for (const auto& m : row.metrics) {
            c.push_back(fmt::format("{:.4f}", m.mean));
            c.push_back(fmt::format("{:.4f}", m.median));
        }
        cells.push_back(std::move(c));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& r : cells)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());

    std::string out;
    auto nkeys = std::max<std::size_t>(table.group_by.size(), 1);
    for (const auto& r : cells) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) line += "  ";
            line += i < nkeys ? fmt::format("{:<{}}", r[i], width[i]) : fmt::format("{:>{}}", r[i], width[i]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    out += fmt::format("total {}\n", table.total);
    return out;
}

std::string render_csv(const ReportTable& table) {
    std::string out;
    for (const auto& k : table.group_by) out += k + ",";
    out += "count";
    for (auto m : kMetricNames) out += fmt::format(",{}_mean,{}_median", m, m);
    out += "\n";
    for (const auto& row : table.rows) {
        for (const auto& k : row.key) out += csv_cell(k) + ",";
        out += std::to_string(row.count);
        for (const auto& m : row.metrics) out += fmt::format(",{:.12g},{:.12g}", m.mean, m.median);
        out += "\n";
    }
    return out;
}

}  // namespace binsum::bench
