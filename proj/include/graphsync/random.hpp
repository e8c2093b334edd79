#pragma once

#include <cstdint>
#include <random>

#include "graphsync/dense_matrix.hpp"

namespace graphsync {

using Rng = std::mt19937_64;

/// Seed for the k-th stochastic consumer under a parent seed. Distinct k give
/// distinct streams, so adding consumers never perturbs earlier ones.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t k) {
    return seed ^ ((k + 1) * 0x9E3779B97F4A7C15ull);
}

inline DenseMatrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = z(rng);
    return m;
}

}  // namespace graphsync
