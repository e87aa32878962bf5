#pragma once

#include <cstdint>
#include <random>

#include "gckd/numerics.hpp"

namespace gckd {

using Rng = std::mt19937_64;

// Stable stream splitting: derived seeds for sub-generators so that adding a
// consumer never shifts another consumer's stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

Vector gaussian_vector(Rng& rng, std::size_t n, double sigma = 1.0);
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sigma = 1.0);
Vector random_unit_vector(Rng& rng, std::size_t n);
// Random orthogonal matrix (Gram-Schmidt on a Gaussian draw).
Matrix random_orthogonal(Rng& rng, std::size_t n);

}  // namespace gckd
