#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace binsum {

// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so seeded sampling goes through these helpers to stay reproducible across
// standard libraries.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // k distinct indices from [0, n) in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace binsum
