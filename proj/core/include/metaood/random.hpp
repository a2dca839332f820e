#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace metaood {

// All randomness in the library flows through explicitly seeded engines of this type.
using Rng = std::mt19937_64;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Draws `k` distinct elements of `pool` uniformly (partial Fisher-Yates). Order is random.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace metaood
