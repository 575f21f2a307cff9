#pragma once

// Brute-force reference implementations of the n-gram metrics. Written
// independently of src/metrics: no shared helpers, different algorithms.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

// Clipped count by position: the k-th occurrence of a gram in the candidate
// is credited iff the reference holds at least k copies.
inline double bleu(const Seq& c, const Seq& r, int max_n) {
    if (c.empty()) return 0.0;
    auto gram_at = [](const Seq& s, std::size_t i, int n) { return Seq(s.begin() + i, s.begin() + i + n); };
    double logs = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        if (c.size() < static_cast<std::size_t>(n)) return 0.0;
        std::size_t total = c.size() - n + 1, credited = 0;
        for (std::size_t i = 0; i < total; ++i) {
            auto g = gram_at(c, i, n);
            std::size_t seen = 0, in_ref = 0;
            for (std::size_t k = 0; k <= i; ++k)
                if (gram_at(c, k, n) == g) ++seen;
            for (std::size_t k = 0; k + n <= r.size(); ++k)
                if (gram_at(r, k, n) == g) ++in_ref;
            if (seen <= in_ref) ++credited;
        }
        if (credited == 0) return 0.0;
        logs += std::log(static_cast<double>(credited) / static_cast<double>(total));
    }
    double bp = c.size() > r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / c.size());
    return bp * std::exp(logs / max_n);
}

// Subset enumeration over the shorter sequence.
inline std::size_t lcs(const Seq& a, const Seq& b) {
    const Seq& s = a.size() <= b.size() ? a : b;
    const Seq& t = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (unsigned mask = 0; mask < (1u << s.size()); ++mask) {
        std::size_t bits = __builtin_popcount(mask);
        if (bits <= best) continue;
        std::size_t j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < s.size() && ok; ++i) {
            if (!(mask & (1u << i))) continue;
            while (j < t.size() && t[j] != s[i]) ++j;
            if (j == t.size()) ok = false;
            else ++j;
        }
        if (ok) best = bits;
    }
    return best;
}

inline double rouge_l(const Seq& c, const Seq& r, double beta) {
    auto l = static_cast<double>(lcs(c, r));
    if (l == 0) return 0.0;
    double p = l / c.size(), rec = l / r.size();
    return (1 + beta * beta) * rec * p / (rec + beta * beta * p);
}

// Maximum bipartite matching (Kuhn) between candidate positions >= from
// and reference positions not in `taken`.
inline std::size_t max_matching(const Seq& c, const Seq& r, std::size_t from, const std::vector<bool>& taken) {
    std::vector<int> owner(r.size(), -1);
    std::size_t size = 0;
    for (std::size_t i = from; i < c.size(); ++i) {
        std::vector<bool> visited(r.size(), false);
        std::function<bool(std::size_t)> augment = [&](std::size_t u) -> bool {
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (taken[j] || visited[j] || r[j] != c[u]) continue;
                visited[j] = true;
                if (owner[j] < 0 || augment(static_cast<std::size_t>(owner[j]))) {
                    owner[j] = static_cast<int>(u);
                    return true;
                }
            }
            return false;
        };
        if (augment(i)) ++size;
    }
    return size;
}

struct Alignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t chunks = 0;
};

// Among maximum-cardinality alignments, the one where each candidate token
// (left to right) takes the earliest reference position that still allows a
// maximum alignment. Chunks = matches minus links continuing in both sequences.
inline Alignment meteor_align(const Seq& c, const Seq& r) {
    std::vector<bool> taken(r.size(), false);
    auto target = max_matching(c, r, 0, taken);
    Alignment a;
    for (std::size_t i = 0; i < c.size(); ++i) {
        bool placed = false;
        for (std::size_t j = 0; j < r.size() && !placed; ++j) {
            if (taken[j] || r[j] != c[i]) continue;
            taken[j] = true;
            if (a.pairs.size() + 1 + max_matching(c, r, i + 1, taken) == target) {
                a.pairs.emplace_back(i, j);
                placed = true;
            } else {
                taken[j] = false;
            }
        }
    }
    std::size_t links = 0;
    for (const auto& p : a.pairs)
        for (const auto& q : a.pairs)
            if (q.first == p.first + 1 && q.second == p.second + 1) ++links;
    a.chunks = a.pairs.size() - links;
    return a;
}

inline double meteor(const Seq& c, const Seq& r, double alpha, double beta, double gamma) {
    auto a = meteor_align(c, r);
    if (a.pairs.empty()) return 0.0;
    double m = static_cast<double>(a.pairs.size());
    double p = m / c.size(), rec = m / r.size();
    double f = p * rec / (alpha * p + (1 - alpha) * rec);
    return (1 - gamma * std::pow(static_cast<double>(a.chunks) / m, beta)) * f;
}

}  // namespace oracle
