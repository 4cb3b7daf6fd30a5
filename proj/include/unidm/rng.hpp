#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace unidm {

/// SplitMix64 (Steele, Lea, Flood 2014). Chosen for sampling because its
/// output sequence is fully specified by the seed on every platform, unlike the
/// standard library distributions.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Unbiased integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

private:
    std::uint64_t state_;
};

/// Chooses min(n, population.size()) distinct elements of `population` with a
/// partial Fisher-Yates shuffle driven by SplitMix64(seed). The result is
/// sorted ascending.
template <typename T>
std::vector<T> seeded_subset(std::vector<T> population, std::size_t n, std::uint64_t seed) {
    const std::size_t take = std::min(n, population.size());
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(population.size() - i));
        std::swap(population[i], population[j]);
    }
    population.resize(take);
    std::sort(population.begin(), population.end());
    return population;
}

} // namespace unidm
