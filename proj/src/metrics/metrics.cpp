#include "binsum/metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "binsum/common/hash.hpp"

namespace binsum::metrics {

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80 || std::isalnum(c)) {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void MetricParams::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("{} must be positive, got {}", what, v));
    };
    positive(meteor_alpha, "meteor alpha");
    positive(meteor_beta, "meteor beta");
    positive(meteor_gamma, "meteor gamma");
    positive(rouge_beta, "rouge beta");
    if (meteor_alpha > 1.0) throw ConfigError("meteor alpha must not exceed 1");
    if (bleu_max_n < 1) throw ConfigError("bleu max n must be at least 1");
}

std::vector<double> EmbeddingProvider::pooled(std::string_view text) const {
    auto tokens = tokenize(text);
    if (tokens.empty()) throw EmptySummaryError("summary has no tokens");
    auto vecs = embed_tokens(tokens);
    if (vecs.size() != tokens.size())
        throw Error(fmt::format("{} returned {} vectors for {} tokens", name(), vecs.size(), tokens.size()));
    std::vector<double> mean(dim(), 0.0);
    for (const auto& v : vecs) {
        if (v.size() != mean.size()) throw Error(fmt::format("{} returned a vector of the wrong size", name()));
        for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
    }
    for (auto& x : mean) x /= static_cast<double>(vecs.size());
    return mean;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

std::string HashEmbedder::name() const { return fmt::format("hash-{}", dim_); }

std::pair<std::size_t, double> HashEmbedder::slot(std::string_view token) const {
    auto h = fnv1a64(token);
    return {static_cast<std::size_t>(h % dim_), (h >> 63) ? -1.0 : 1.0};
}

std::vector<std::vector<double>> HashEmbedder::embed_tokens(const Tokens& tokens) const {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        std::vector<double> v(dim_, 0.0);
        auto [idx, sign] = slot(t);
        v[idx] = sign;
        out.push_back(std::move(v));
    }
    return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("cosine of vectors with different dimensions");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DegenerateEmbeddingError("pooled embedding is the zero vector");
    if (!std::isfinite(dot) || !std::isfinite(na) || !std::isfinite(nb))
        throw DegenerateEmbeddingError("pooled embedding is not finite");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double semantic_similarity(const EmbeddingProvider& provider, std::string_view generated,
                           std::string_view reference) {
    if (tokenize(generated).empty()) throw EmptySummaryError("generated summary has no tokens");
    if (tokenize(reference).empty()) throw EmptySummaryError("reference summary has no tokens");
    auto s = cosine(provider.pooled(generated), provider.pooled(reference));
    return std::clamp(s, -1.0, 1.0);
}

double bleu(const Tokens& candidate, const Tokens& reference, int max_n) {
    if (max_n < 1) throw ConfigError("bleu max n must be at least 1");
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        auto count = [n](const Tokens& t) {
            std::map<std::vector<std::string>, std::size_t> grams;
            for (std::size_t i = 0; i + n <= t.size(); ++i)
                ++grams[std::vector<std::string>(t.begin() + i, t.begin() + i + n)];
            return grams;
        };
        auto cand = count(candidate);
        auto ref = count(reference);
        std::size_t clipped = 0, total = 0;
        for (const auto& [gram, c] : cand) {
            total += c;
            auto it = ref.find(gram);
            if (it != ref.end()) clipped += std::min(c, it->second);
        }
        if (clipped == 0 || total == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total)) / max_n;
    }
    double c = static_cast<double>(candidate.size());
    double r = static_cast<double>(reference.size());
    double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference) {
    MeteorAlignment a;
    std::vector<bool> used(reference.size(), false);
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        for (std::size_t j = 0; j < reference.size(); ++j) {
            if (!used[j] && reference[j] == candidate[i]) {
                used[j] = true;
                a.pairs.emplace_back(i, j);
                break;
            }
        }
    }
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
        bool continues = k > 0 && a.pairs[k].first == a.pairs[k - 1].first + 1 &&
                         a.pairs[k].second == a.pairs[k - 1].second + 1;
        if (!continues) ++a.chunks;
    }
    return a;
}

double meteor(const Tokens& candidate, const Tokens& reference, const MetricParams& params) {
    auto a = meteor_align(candidate, reference);
    if (a.pairs.empty()) return 0.0;
    double m = static_cast<double>(a.pairs.size());
    double p = m / static_cast<double>(candidate.size());
    double r = m / static_cast<double>(reference.size());
    double f_mean = p * r / (params.meteor_alpha * p + (1.0 - params.meteor_alpha) * r);
    double frag = static_cast<double>(a.chunks) / m;
    double penalty = params.meteor_gamma * std::pow(frag, params.meteor_beta);
    return std::clamp((1.0 - penalty) * f_mean, 0.0, 1.0);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
    auto lcs = lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    double b2 = beta * beta;
    return std::clamp((1.0 + b2) * r * p / (r + b2 * p), 0.0, 1.0);
}

model::ScoreSet score_pair(const EmbeddingProvider& provider, const MetricParams& params,
                           const model::SummaryPair& pair) {
    auto cand = tokenize(pair.generated);
    auto ref = tokenize(pair.reference);
    if (cand.empty()) throw EmptySummaryError("generated summary has no tokens");
    if (ref.empty()) throw EmptySummaryError("reference summary has no tokens");
    model::ScoreSet s;
    s.semantic = semantic_similarity(provider, pair.generated, pair.reference);
    s.bleu1 = bleu(cand, ref, params.bleu_max_n);
    s.meteor = meteor(cand, ref, params);
    s.rouge_l = rouge_l(cand, ref, params.rouge_beta);
    return s;
}

}  // namespace binsum::metrics
