#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lrednn/linalg.hpp"
#include "test_util.hpp"

using namespace lrednn;
using lrednn::testing::max_abs;
using lrednn::testing::random_matrix;

namespace {

void expect_orthonormal_columns(const DenseMatrix& q, double tol) {
    const DenseMatrix gram = q.transpose() * q;
    EXPECT_LE(max_abs(gram - DenseMatrix::Identity(q.cols(), q.cols())), tol);
}

}  // namespace

TEST(Svd, IdentityIsItsOwnDecomposition) {
    const auto r = linalg::svd(DenseMatrix::Identity(3, 3));
    EXPECT_LE(max_abs(r.s - Vector::Ones(3)), 1e-15);
    // Any orthonormal u with v = u is valid for a repeated singular value.
    EXPECT_LE(max_abs(r.u * r.v.transpose() - DenseMatrix::Identity(3, 3)), 1e-14);
}

TEST(Svd, DiagonalGivesSortedValuesAndSignedPermutations) {
    DenseMatrix a(2, 2);
    a << 1, 0, 0, 3;
    const auto r = linalg::svd(a);
    EXPECT_NEAR(r.s[0], 3.0, 1e-15);
    EXPECT_NEAR(r.s[1], 1.0, 1e-15);
    EXPECT_NEAR(std::abs(r.u(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(r.v(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(r.u(0, 1)), 1.0, 1e-15);
}

TEST(Svd, ReconstructsRandomMatrices) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Index rows = 1 + static_cast<Index>(seed % 30);
        const Index cols = 1 + static_cast<Index>((seed * 7) % 30);
        const DenseMatrix a = random_matrix(rows, cols, seed);
        const auto r = linalg::svd(a);
        ASSERT_EQ(r.rank(), std::min(rows, cols));
        EXPECT_LE((a - r.reconstruct()).norm() / a.norm(), 1e-10) << "seed " << seed;
        expect_orthonormal_columns(r.u, 1e-10);
        expect_orthonormal_columns(r.v, 1e-10);
        for (Index i = 1; i < r.rank(); ++i) EXPECT_GE(r.s[i - 1], r.s[i]);
        EXPECT_GE(r.s.minCoeff(), 0.0);
    }
}

TEST(Svd, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(linalg::svd(DenseMatrix(0, 3)), ContractViolation);
    DenseMatrix a = DenseMatrix::Identity(2, 2);
    a(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(linalg::svd(a), NumericalError);
}

TEST(TruncatedSvd, KeepsDominantMode) {
    DenseMatrix a(2, 2);
    a << 3, 0, 0, 1;
    const auto t = linalg::truncated_svd(a, 1);
    ASSERT_EQ(t.rank(), 1);
    EXPECT_NEAR(t.s[0], 3.0, 1e-15);
    EXPECT_FALSE(t.clamped());
}

TEST(TruncatedSvd, ClampsToFullRank) {
    const DenseMatrix a = random_matrix(4, 6, 11);
    const auto full = linalg::svd(a);
    const auto t = linalg::truncated_svd(a, 10);
    EXPECT_TRUE(t.clamped());
    EXPECT_EQ(t.rank(), 4);
    EXPECT_EQ(t.requested_rank, 10);
    EXPECT_LE(max_abs(t.s - full.s), 0.0);
    EXPECT_LE(max_abs(t.reconstruct() - full.reconstruct()), 0.0);
    EXPECT_THROW(linalg::truncated_svd(a, 0), ContractViolation);
}

TEST(TruncatedSvd, EckartYoungErrorMatchesTailOfSpectrum) {
    const DenseMatrix a = random_matrix(5, 4, 5);
    const auto full = linalg::svd(a);
    const auto t = linalg::truncated_svd(a, 2);
    const double err = (a - t.reconstruct()).norm();
    EXPECT_NEAR(err, std::hypot(full.s[2], full.s[3]), 1e-12);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const DenseMatrix b = random_matrix(12, 9, 100 + seed);
        const auto sb = linalg::svd(b);
        for (Index r = 1; r <= 9; ++r) {
            const double e2 = (b - linalg::truncated_svd(b, r).reconstruct()).squaredNorm();
            const double tail = sb.s.tail(9 - r).squaredNorm();
            EXPECT_LE(std::abs(e2 - tail), 1e-8 * std::max(tail, 1e-300) + 1e-20)
                << "seed " << seed << " r " << r;
        }
    }
}

TEST(NormalSolve, IdentitySystem) {
    Vector b(2);
    b << 1, 2;
    const auto x = linalg::solve_regularized_normal(DenseMatrix::Identity(2, 2), b, 0.0).x;
    EXPECT_NEAR(x[0], 1.0, 1e-15);
    EXPECT_NEAR(x[1], 2.0, 1e-15);
}

TEST(NormalSolve, SingularDirectionIsZeroedWithoutShift) {
    DenseMatrix g(2, 2);
    g << 4, 0, 0, 0;
    Vector b(2);
    b << 8, 0;
    const auto x = linalg::solve_regularized_normal(g, b, 0.0).x;
    EXPECT_NEAR(x[0], 2.0, 1e-15);
    EXPECT_EQ(x[1], 0.0);
}

TEST(NormalSolve, ShiftedSolveMatchesClosedForm) {
    DenseMatrix g(2, 2);
    g << 4, 0, 0, 0;
    Vector b(2);
    b << 8, 0;
    const auto x = linalg::solve_regularized_normal(g, b, 1.0).x;
    EXPECT_NEAR(x[0], 8.0 / 5.0, 1e-15);
    EXPECT_NEAR(x[1], 0.0, 1e-15);
}

TEST(NormalSolve, RejectsAsymmetricMatrix) {
    DenseMatrix g(2, 2);
    g << 1, 0.5, 0, 1;
    EXPECT_THROW(linalg::solve_regularized_normal(g, Vector::Ones(2), 0.0), ContractViolation);
}

TEST(NormalSolve, ResidualBoundOnWellPosedSystems) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const DenseMatrix a = random_matrix(40, 15, 200 + seed);
        const DenseMatrix g = linalg::gram(a);
        const Vector b = lrednn::testing::random_vector(15, 300 + seed);
        for (double lambda : {0.0, 1e-6, 1.0}) {
            const Vector x = linalg::solve_regularized_normal(g, b, lambda).x;
            DenseMatrix shifted = g;
            shifted.diagonal().array() += lambda;
            const double bound = 1e-8 * (g.norm() + lambda) * x.norm();
            EXPECT_LE((shifted * x - b).cwiseAbs().maxCoeff(), bound);
        }
    }
}

TEST(NormalSolve, MinimumNormForRankDeficientGram) {
    // g = a^T a with a 3 x 5 has rank 3; min-norm solution lies in range(a^T).
    const DenseMatrix a = random_matrix(3, 5, 9);
    const DenseMatrix g = linalg::gram(a);
    const Vector b = g * lrednn::testing::random_vector(5, 10);
    const Vector x = linalg::solve_regularized_normal(g, b, 0.0).x;
    EXPECT_LE((g * x - b).norm(), 1e-10 * b.norm());
    const auto s = linalg::svd(a);
    const Vector outside = x - s.v * (s.v.transpose() * x);
    EXPECT_LE(outside.norm(), 1e-10 * x.norm());
}

TEST(Gram, MatchesDenseProduct) {
    const DenseMatrix a = random_matrix(17, 6, 3);
    EXPECT_LE(max_abs(linalg::gram(a) - a.transpose() * a), 1e-13);
}
