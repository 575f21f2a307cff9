#include "doctest.h"

#include <cmath>
#include <map>

#include "binsum/common/random.hpp"
#include "binsum/metrics/metrics.hpp"
#include "../support/metric_oracles.hpp"

using namespace binsum;
using namespace binsum::metrics;

namespace {

Tokens toks(std::initializer_list<const char*> list) { return Tokens(list.begin(), list.end()); }

Tokens random_tokens(SeededRng& rng, std::size_t max_len, std::size_t alphabet) {
    Tokens t(rng.below(max_len + 1));
    for (auto& x : t) x = std::string(1, static_cast<char>('a' + rng.below(alphabet)));
    return t;
}

std::string join(const Tokens& t) {
    std::string s;
    for (const auto& x : t) s += (s.empty() ? "" : " ") + x;
    return s;
}

// Multiplies every token vector by a positive constant.
class ScaledProvider final : public EmbeddingProvider {
public:
    ScaledProvider(const EmbeddingProvider& inner, double scale) : inner_(inner), scale_(scale) {}
    [[nodiscard]] std::string name() const override { return "scaled"; }
    [[nodiscard]] std::size_t dim() const override { return inner_.dim(); }
    [[nodiscard]] std::vector<std::vector<double>> embed_tokens(const Tokens& t) const override {
        auto v = inner_.embed_tokens(t);
        for (auto& row : v)
            for (auto& x : row) x *= scale_;
        return v;
    }

private:
    const EmbeddingProvider& inner_;
    double scale_;
};

}  // namespace

TEST_CASE("tokenization") {
    CHECK(tokenize("Returns the SUM of a,b.") == toks({"returns", "the", "sum", "of", "a", "b"}));
    CHECK(tokenize("  --  ").empty());
    CHECK(tokenize("x86_64 foo-bar") == toks({"x86", "64", "foo", "bar"}));
    CHECK(tokenize("naïve café") == toks({"naïve", "café"}));
}

TEST_CASE("bleu examples") {
    CHECK(bleu(toks({"a", "b", "c"}), toks({"a", "b", "c"})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bleu(toks({"a", "b"}), toks({"a", "c"}), 1) == doctest::Approx(0.5).epsilon(1e-12));
    // Clipping: only one "the" is credited; BP = exp(1 - 2/3) = 1 since c > r.
    CHECK(bleu(toks({"the", "the", "the"}), toks({"the", "cat"}), 1) == doctest::Approx(1.0 / 3.0));
    CHECK(bleu(toks({"the"}), toks({"the", "cat"}), 1) == doctest::Approx(std::exp(1.0 - 2.0)));
    CHECK(bleu({}, toks({"a"}), 1) == 0.0);
    CHECK(bleu(toks({"a"}), toks({"a", "b"}), 2) == 0.0);
    CHECK_THROWS_AS(bleu(toks({"a"}), toks({"a"}), 0), ConfigError);
}

TEST_CASE("meteor examples") {
    MetricParams p;
    CHECK(meteor(toks({"a"}), toks({"a"}), p) == doctest::Approx(0.5).epsilon(1e-12));
    for (int m = 1; m <= 8; ++m) {
        Tokens t;
        for (int i = 0; i < m; ++i) t.push_back("w" + std::to_string(i));
        CHECK(meteor(t, t, p) == doctest::Approx(1.0 - 0.5 * std::pow(1.0 / m, 3)).epsilon(1e-12));
    }
    CHECK(meteor(toks({"a", "b"}), toks({"c", "d"}), p) == 0.0);
    auto a = meteor_align(toks({"a", "b", "c", "d"}), toks({"a", "c", "b", "d"}));
    CHECK(a.pairs.size() == 4);
    CHECK(a.chunks == 4);
    CHECK(meteor(toks({"a", "b", "c", "d"}), toks({"a", "c", "b", "d"}), p) == doctest::Approx(0.5).epsilon(1e-12));
    auto o = oracle::meteor_align(toks({"a", "b", "c", "d"}), toks({"a", "c", "b", "d"}));
    CHECK(o.chunks == 4);
}

TEST_CASE("rouge-l examples") {
    CHECK(rouge_l(toks({"a", "b"}), toks({"a", "b"}), 1.2) == doctest::Approx(1.0).epsilon(1e-12));
    // LCS 2, P = 2/3, R = 1.
    double p = 2.0 / 3.0, r = 1.0, b2 = 1.44;
    double expect = (1 + b2) * r * p / (r + b2 * p);
    CHECK(rouge_l(toks({"a", "b", "c"}), toks({"a", "c"}), 1.2) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(rouge_l(toks({"a", "b", "c"}), toks({"a", "c"}), 1.2) - 0.8299) < 1e-4);
    CHECK(rouge_l(toks({"a"}), toks({"b"}), 1.2) == 0.0);
    CHECK(rouge_l({}, toks({"b"}), 1.2) == 0.0);
}

TEST_CASE("n-gram metrics match brute-force oracles on random pairs") {
    SeededRng rng(1);
    MetricParams p;
    for (int i = 0; i < 1000; ++i) {
        auto c = random_tokens(rng, 12, 1 + rng.below(6));
        auto r = random_tokens(rng, 12, 1 + rng.below(6));
        CAPTURE(join(c));
        CAPTURE(join(r));
        CHECK(std::abs(bleu(c, r, 1) - oracle::bleu(c, r, 1)) < 1e-9);
        CHECK(std::abs(bleu(c, r, 2) - oracle::bleu(c, r, 2)) < 1e-9);
        CHECK(std::abs(bleu(c, r, 4) - oracle::bleu(c, r, 4)) < 1e-9);
        CHECK(std::abs(meteor(c, r, p) - oracle::meteor(c, r, 0.9, 3.0, 0.5)) < 1e-9);
        CHECK(std::abs(rouge_l(c, r, 1.2) - oracle::rouge_l(c, r, 1.2)) < 1e-9);
        CHECK(lcs_length(c, r) == oracle::lcs(c, r));
        auto a = meteor_align(c, r);
        auto o = oracle::meteor_align(c, r);
        CHECK(a.pairs == o.pairs);
        CHECK(a.chunks == o.chunks);
    }
}

TEST_CASE("n-gram metrics are invariant under alphabet relabeling and stay in range") {
    SeededRng rng(5);
    MetricParams p;
    for (int i = 0; i < 300; ++i) {
        auto c = random_tokens(rng, 12, 6);
        auto r = random_tokens(rng, 12, 6);
        std::map<std::string, std::string> relabel;
        auto perm = rng.sample_indices(6, 6);
        for (std::size_t k = 0; k < 6; ++k)
            relabel[std::string(1, static_cast<char>('a' + k))] = "tok" + std::to_string(perm[k]);
        auto map = [&](Tokens t) {
            for (auto& x : t) x = relabel.at(x);
            return t;
        };
        CHECK(bleu(c, r, 1) == bleu(map(c), map(r), 1));
        CHECK(meteor(c, r, p) == meteor(map(c), map(r), p));
        CHECK(rouge_l(c, r, 1.2) == rouge_l(map(c), map(r), 1.2));
        for (double v : {bleu(c, r, 1), bleu(c, r, 3), meteor(c, r, p), rouge_l(c, r, 1.2)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("hash embedder layout") {
    HashEmbedder e;
    CHECK(e.dim() == 4096);
    auto v = e.embed_tokens(toks({"hello", "world"}));
    REQUIRE(v.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        int nonzero = 0;
        for (double x : v[k])
            if (x != 0.0) {
                ++nonzero;
                CHECK(std::abs(x) == 1.0);
            }
        CHECK(nonzero == 1);
    }
    // FNV-1a 64 of "a" is 0xaf63dc4c8601ec8c: index 0xc8c, top bit set.
    auto [idx, sign] = e.slot("a");
    CHECK(idx == 0xaf63dc4c8601ec8cULL % 4096);
    CHECK(sign == -1.0);
    CHECK(v[0][e.slot("hello").first] == e.slot("hello").second);
}

TEST_CASE("semantic similarity basics") {
    HashEmbedder e;
    CHECK(semantic_similarity(e, "Sorts the array in place.", "sorts the array in place") ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(semantic_similarity(e, "", "x"), EmptySummaryError);
    CHECK_THROWS_AS(semantic_similarity(e, "x", "..."), EmptySummaryError);
}

TEST_CASE("opposite-sign collision scores -1") {
    HashEmbedder e;
    std::map<std::size_t, std::pair<std::string, double>> seen;
    std::string a, b;
    for (int i = 0; a.empty(); ++i) {
        auto t = "t" + std::to_string(i);
        auto [idx, sign] = e.slot(t);
        auto it = seen.find(idx);
        if (it != seen.end() && it->second.second != sign) {
            a = it->second.first;
            b = t;
        } else if (it == seen.end()) {
            seen.emplace(idx, std::make_pair(t, sign));
        }
    }
    CHECK(semantic_similarity(e, a, b) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("disjoint collision-free vocabularies score exactly 0") {
    HashEmbedder e;
    SeededRng rng(11);
    int checked = 0;
    while (checked < 50) {
        Tokens x, y;
        for (int i = 0; i < 4; ++i) x.push_back("x" + std::to_string(rng.below(100000)));
        for (int i = 0; i < 4; ++i) y.push_back("y" + std::to_string(rng.below(100000)));
        std::map<std::size_t, int> used;
        for (const auto& t : x) ++used[e.slot(t).first];
        for (const auto& t : y) ++used[e.slot(t).first];
        if (used.size() != 8) continue;  // index collision: not this property
        CHECK(semantic_similarity(e, join(x), join(y)) == 0.0);
        ++checked;
    }
}

TEST_CASE("semantic similarity is symmetric and scale invariant") {
    HashEmbedder e(64);  // small dim so random pairs overlap and collide
    ScaledProvider s(e, 3.75);
    SeededRng rng(3);
    for (int i = 0; i < 100; ++i) {
        Tokens a(1 + rng.below(8)), b(1 + rng.below(8));
        for (auto& t : a) t = "w" + std::to_string(rng.below(20));
        for (auto& t : b) t = "w" + std::to_string(rng.below(20));
        auto ab = semantic_similarity(e, join(a), join(b));
        CHECK(std::abs(ab - semantic_similarity(e, join(b), join(a))) <= 1e-12);
        try {
            CHECK(std::abs(ab - semantic_similarity(s, join(a), join(b))) <= 1e-12);
        } catch (const DegenerateEmbeddingError&) {
            FAIL("degenerate only under scaling");
        }
        CHECK(ab >= -1.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("zero pooled vector is a degenerate embedding") {
    HashEmbedder e;
    // Two tokens at the same index with opposite signs cancel.
    std::map<std::size_t, std::pair<std::string, double>> seen;
    std::string a, b;
    for (int i = 0; a.empty(); ++i) {
        auto t = "t" + std::to_string(i);
        auto [idx, sign] = e.slot(t);
        auto it = seen.find(idx);
        if (it != seen.end() && it->second.second != sign) {
            a = it->second.first;
            b = t;
        } else if (it == seen.end()) {
            seen.emplace(idx, std::make_pair(t, sign));
        }
    }
    CHECK_THROWS_AS(semantic_similarity(e, a + " " + b, "anything"), DegenerateEmbeddingError);
}

TEST_CASE("score_pair") {
    HashEmbedder e;
    MetricParams p;
    auto same = score_pair(e, p, {"Returns", "returns"});
    CHECK(same.semantic == doctest::Approx(1.0));
    CHECK(same.bleu1 == doctest::Approx(1.0));
    CHECK(same.meteor == doctest::Approx(0.5));
    CHECK(same.rouge_l == doctest::Approx(1.0));
    auto s = score_pair(e, p, {"a b c", "a c"});
    CHECK(s.rouge_l == doctest::Approx(oracle::rouge_l(toks({"a", "b", "c"}), toks({"a", "c"}), 1.2)));
    CHECK(s.bleu1 == doctest::Approx(oracle::bleu(toks({"a", "b", "c"}), toks({"a", "c"}), 1)));
    CHECK_NOTHROW(model::validate(s));
    CHECK_THROWS_AS(score_pair(e, p, {"", "x"}), EmptySummaryError);
}

TEST_CASE("metric parameters validate") {
    MetricParams p;
    CHECK_NOTHROW(p.validate());
    p.meteor_alpha = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.rouge_beta = -1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
