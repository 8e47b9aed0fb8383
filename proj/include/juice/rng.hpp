#pragma once

#include <cstdint>
#include <random>

#include "juice/types.hpp"

namespace juice {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent seeds from a
/// (base, counter) pair so that seeds never depend on execution order.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter) noexcept
{
    return splitmix64(splitmix64(base) ^ (counter + 0x632BE59BD9B4E019ULL));
}

/// Standard circularly-symmetric complex Gaussian, E|w|^2 = 1.
inline cplx standard_complex_normal(Rng& rng)
{
    std::normal_distribution<double> nd(0.0, 0.7071067811865476);
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline CMatrix standard_complex_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
    CMatrix out(rows, cols);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            out(i, j) = standard_complex_normal(rng);
    return out;
}

} // namespace juice
