#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "binsum/common/error.hpp"
#include "binsum/model/record.hpp"

namespace binsum::metrics {

using Tokens = std::vector<std::string>;

class EmptySummaryError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "empty_summary"; }
};

class DegenerateEmbeddingError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "degenerate_embedding"; }
};

// Lowercases ASCII and splits on maximal runs of non-alphanumeric bytes.
// Bytes >= 0x80 count as alphanumeric, so UTF-8 words stay whole.
Tokens tokenize(std::string_view text);

struct MetricParams {
    double meteor_alpha = 0.9;
    double meteor_beta = 3.0;
    double meteor_gamma = 0.5;
    double rouge_beta = 1.2;
    int bleu_max_n = 1;

    void validate() const;  // throws ConfigError
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::size_t dim() const = 0;
    // One vector of length dim() per token.
    [[nodiscard]] virtual std::vector<std::vector<double>> embed_tokens(const Tokens& tokens) const = 0;
    // Sequence embedding. Default: arithmetic mean of embed_tokens(tokenize(text));
    // services that pool natively override this. Throws EmptySummaryError.
    [[nodiscard]] virtual std::vector<double> pooled(std::string_view text) const;
    // Which tokenization defines |S| in the mean: "shared" or the service's own.
    [[nodiscard]] virtual std::string tokenization() const { return "shared"; }
    [[nodiscard]] virtual bool concurrent() const { return true; }
};

// Feature-hashing stand-in: token -> ±1 at fnv1a64(token) mod dim, negative
// when the hash's top bit is set.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dim = 4096);
    [[nodiscard]] std::string name() const override;
    [[nodiscard]] std::size_t dim() const override { return dim_; }
    [[nodiscard]] std::vector<std::vector<double>> embed_tokens(const Tokens& tokens) const override;

    [[nodiscard]] std::pair<std::size_t, double> slot(std::string_view token) const;

private:
    std::size_t dim_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);  // throws DegenerateEmbeddingError

// Mean-pooled cosine similarity, clamped to [-1, 1].
double semantic_similarity(const EmbeddingProvider& provider, std::string_view generated, std::string_view reference);

double bleu(const Tokens& candidate, const Tokens& reference, int max_n = 1);

struct MeteorAlignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (candidate idx, reference idx), by candidate idx
    std::size_t chunks = 0;
};

// Exact-unigram alignment: each candidate token, left to right, takes the
// earliest unmatched equal reference token.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference);
double meteor(const Tokens& candidate, const Tokens& reference, const MetricParams& params = {});

std::size_t lcs_length(const Tokens& a, const Tokens& b);
double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.2);

model::ScoreSet score_pair(const EmbeddingProvider& provider, const MetricParams& params,
                           const model::SummaryPair& pair);

}  // namespace binsum::metrics
