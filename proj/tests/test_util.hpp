#pragma once

#include <cstdint>
#include <random>

#include "lrednn/linalg.hpp"

namespace lrednn::testing {

inline DenseMatrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    DenseMatrix a(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) a(i, j) = normal(rng);
    return a;
}

inline Vector random_vector(Index n, std::uint64_t seed) {
    return random_matrix(n, 1, seed).col(0);
}

inline double max_abs(const DenseMatrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace lrednn::testing
