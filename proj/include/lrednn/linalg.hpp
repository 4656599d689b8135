#pragma once

// Dense kernels shared by the velocity solvers: thin and truncated SVD and
// the (optionally shifted) normal-equation solve.
//
// Everything here is a pure function of its arguments. Matrices are small
// (at most a few thousand columns), so nothing is sparse.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "lrednn/errors.hpp"

namespace lrednn {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double kPinvCutoff = 1e-12;

struct SvdResult {
    DenseMatrix u;  // n x k, orthonormal columns
    Vector s;       // k, nonincreasing, nonnegative
    DenseMatrix v;  // m x k, orthonormal columns

    Index rank() const noexcept { return s.size(); }

    DenseMatrix reconstruct() const { return u * s.asDiagonal() * v.transpose(); }
};

struct TruncatedSvd : SvdResult {
    Index requested_rank = 0;

    /// True when the requested rank exceeded min(rows, cols).
    bool clamped() const noexcept { return requested_rank > rank(); }
};

inline bool all_finite(const DenseMatrix& a) { return a.allFinite(); }

/// Thin SVD with k = min(rows, cols).
inline SvdResult svd(const DenseMatrix& a) {
    if (a.size() == 0) throw ContractViolation("svd: empty matrix");
    if (!a.allFinite()) throw NumericalError("svd: input contains non-finite entries");

    // One-sided Jacobi is the most accurate choice at these sizes.
    Eigen::JacobiSVD<DenseMatrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
    if (!out.u.allFinite() || !out.s.allFinite() || !out.v.allFinite())
        throw NumericalError("svd: iteration failed to converge (non-finite factors)");
    return out;
}

/// Leading min(r, rows, cols) singular triplets of `a`.
inline TruncatedSvd truncated_svd(const DenseMatrix& a, Index r) {
    if (r < 1) throw ContractViolation("truncated_svd: rank must be >= 1");
    SvdResult full = svd(a);
    const Index k = std::min<Index>(r, full.rank());
    TruncatedSvd out;
    out.u = full.u.leftCols(k);
    out.s = full.s.head(k);
    out.v = full.v.leftCols(k);
    out.requested_rank = r;
    return out;
}

struct NormalSolution {
    Vector x;
    /// Ratio of extreme eigenvalue magnitudes of the system actually solved.
    double condition_estimate = 1.0;
};

namespace detail {

// Minimum-norm solve of a symmetric system through its eigendecomposition.
inline NormalSolution pinv_solve(const DenseMatrix& g, const Vector& b) {
    NormalSolution out;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(g);
    if (eig.info() != Eigen::Success)
        throw NumericalError("solve_regularized_normal: eigensolver failed to converge");
    const Vector& e = eig.eigenvalues();
    const double emax = e.cwiseAbs().maxCoeff();
    if (emax == 0.0) {
        out.x = Vector::Zero(b.size());
        return out;
    }
    const Vector proj = eig.eigenvectors().transpose() * b;
    Vector coeff = Vector::Zero(e.size());
    double emin = emax;
    for (Index i = 0; i < e.size(); ++i) {
        if (std::abs(e[i]) > kPinvCutoff * emax) {
            coeff[i] = proj[i] / e[i];
            emin = std::min(emin, std::abs(e[i]));
        }
    }
    out.x = eig.eigenvectors() * coeff;
    out.condition_estimate = emax / emin;
    return out;
}

}  // namespace detail

/// Solves (g + lambda I) x = b for symmetric positive semidefinite g.
///
/// With lambda == 0 the minimum-norm solution is returned through an
/// eigendecomposition, discarding eigenvalues below kPinvCutoff * max.
/// Symmetry is checked relative to the largest entry of g.
inline NormalSolution solve_regularized_normal(const DenseMatrix& g, const Vector& b,
                                               double lambda) {
    if (g.rows() != g.cols())
        throw ContractViolation("solve_regularized_normal: matrix is not square");
    if (g.rows() != b.size())
        throw ContractViolation("solve_regularized_normal: right-hand side length mismatch");
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw ContractViolation("solve_regularized_normal: lambda must be finite and >= 0");
    if (!g.allFinite() || !b.allFinite())
        throw NumericalError("solve_regularized_normal: non-finite system");
    if (g.size() == 0) return NormalSolution{Vector::Zero(0), 1.0};

    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw ContractViolation("solve_regularized_normal: matrix is not symmetric");

    NormalSolution out;
    if (lambda > 0.0) {
        DenseMatrix shifted = g;
        shifted.diagonal().array() += lambda;
        Eigen::LLT<DenseMatrix> llt(shifted);
        if (llt.info() == Eigen::Success) {
            out.x = llt.solve(b);
            const Vector d = llt.matrixL().toDenseMatrix().diagonal();
            const double ratio = d.maxCoeff() / d.minCoeff();
            out.condition_estimate = ratio * ratio;
        }
        // Shift too small to make the matrix numerically definite.
        if (llt.info() != Eigen::Success || !out.x.allFinite()) out = detail::pinv_solve(shifted, b);
    } else {
        out = detail::pinv_solve(g, b);
    }
    if (!out.x.allFinite()) throw NumericalError("solve_regularized_normal: non-finite solution");
    return out;
}

/// min |a x - b|^2 + lambda |x|^2 factoring `a` itself instead of a^T a.
///
/// Same solution as solve_regularized_normal(gram(a), a^T b, lambda) in exact
/// arithmetic, but the error grows with cond(a) rather than cond(a)^2. With
/// lambda == 0 singular values of `a` below kPinvCutoff * max are dropped
/// (minimum-norm solution); with lambda > 0 the augmented system
/// [a; sqrt(lambda) I] is solved by Householder QR.
inline NormalSolution least_squares(const DenseMatrix& a, const Vector& b, double lambda) {
    if (a.rows() != b.size()) throw ContractViolation("least_squares: right-hand side length mismatch");
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw ContractViolation("least_squares: lambda must be finite and >= 0");
    if (!a.allFinite() || !b.allFinite()) throw NumericalError("least_squares: non-finite system");
    NormalSolution out;
    if (a.cols() == 0) return NormalSolution{Vector::Zero(0), 1.0};
    if (lambda == 0.0) {
        Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector& s = svd.singularValues();
        if (!s.allFinite()) throw NumericalError("least_squares: SVD failed to converge");
        if (s.size() == 0 || s[0] == 0.0) return NormalSolution{Vector::Zero(a.cols()), 1.0};
        Index k = 0;
        while (k < s.size() && s[k] > kPinvCutoff * s[0]) ++k;
        const Vector coeff = (svd.matrixU().leftCols(k).transpose() * b).cwiseQuotient(s.head(k));
        out.x = svd.matrixV().leftCols(k) * coeff;
        const double ratio = s[0] / s[k - 1];
        out.condition_estimate = ratio * ratio;
    } else {
        DenseMatrix aug(a.rows() + a.cols(), a.cols());
        aug.topRows(a.rows()) = a;
        aug.bottomRows(a.cols()) = std::sqrt(lambda) * DenseMatrix::Identity(a.cols(), a.cols());
        Vector rhs = Vector::Zero(aug.rows());
        rhs.head(b.size()) = b;
        Eigen::HouseholderQR<DenseMatrix> qr(aug);
        out.x = qr.solve(rhs);
        const Vector d = qr.matrixQR().diagonal().cwiseAbs();
        const double ratio = d.maxCoeff() / d.minCoeff();
        out.condition_estimate = ratio * ratio;
    }
    if (!out.x.allFinite()) throw NumericalError("least_squares: non-finite solution");
    return out;
}

/// Gram matrix a^T a, exploiting symmetry.
inline DenseMatrix gram(const DenseMatrix& a) {
    DenseMatrix g = DenseMatrix::Zero(a.cols(), a.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
    return g.selfadjointView<Eigen::Lower>();
}

/// Default shift: rel * trace(g) / dim(g).
inline double relative_shift(const DenseMatrix& g, double rel) {
    if (g.rows() == 0 || rel <= 0.0) return 0.0;
    return rel * g.trace() / static_cast<double>(g.rows());
}

}  // namespace linalg
}  // namespace lrednn
