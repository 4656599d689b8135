#pragma once

// Low-rank parameterizations of the parameter velocity.
//
// SVD subspace: for each weight matrix W = U S V^T (truncated to rank r),
//
//     dW = A (sqrt(S) V^T) + (U sqrt(S)) B,    A: n x r,  B: r x m,
//
// and the unknown gamma stacks every (A, B) pair followed by the bias
// velocities (unless biases are frozen). L_UV is the linear map
// gamma -> dW in the flattened parameter layout.
//
// Factored path: a single weight matrix kept as W = M R; its velocity is
// dW = M dR + dM R, and every other parameter is a free coordinate.
//
// Both maps have the form dW = A Y^T + X B for fixed X, Y, so the column
// blocks of J L share one structured kernel.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lrednn/errors.hpp"
#include "lrednn/linalg.hpp"
#include "lrednn/network.hpp"

namespace lrednn {

enum class BiasMode { unconstrained, frozen };

/// Relative threshold below which a singular value counts as zero.
inline constexpr double kZeroSingularValue = 1e-12;

struct LayerBasis {
    DenseMatrix u;      // n x r
    Vector s;           // r
    DenseMatrix v;      // m x r
    DenseMatrix left;   // U_r sqrt(S_r), n x r
    DenseMatrix right;  // V_r sqrt(S_r), m x r; the factor multiplying A is right^T
    Index requested_rank = 0;
    Index dropped = 0;  // zero singular values removed from the window

    Index rank() const noexcept { return s.size(); }
    Index rows() const noexcept { return u.rows(); }
    Index cols() const noexcept { return v.rows(); }
    Index coefficient_count() const noexcept { return rank() * (rows() + cols()); }
};

/// Per-layer coefficient blocks of gamma.
struct VelocityCoefficients {
    std::vector<DenseMatrix> a_blocks;  // n_l x r_l
    std::vector<DenseMatrix> b_blocks;  // r_l x m_l
    Vector bias_block;                  // all bias velocities, layer order; empty when frozen
};

namespace detail {

// Parameter-layout bookkeeping copied out of the network.
struct LayerLayout {
    std::size_t weight_offset;
    std::size_t bias_offset;
    Index rows;
    Index cols;
};

inline std::vector<LayerLayout> layout_of(const MlpNetwork& net) {
    std::vector<LayerLayout> out;
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        out.push_back({net.weight_offset(l), net.bias_offset(l), net.layer(l).rows(),
                       net.layer(l).cols()});
    return out;
}

// Columns of J L for dW = A Y^T + X B on one n x m weight block of J starting
// at column `offset`. A-columns are ordered (i, k) row-major, then the
// B-columns (k, j) row-major.
inline void structured_block(const DenseMatrix& j, std::size_t offset, Index n, Index m,
                             const DenseMatrix& x, const DenseMatrix& y, DenseMatrix& out,
                             Index col0_a, Index col0_b) {
    const Index r_a = y.cols();
    const Index r_b = x.cols();
    const Index off = static_cast<Index>(offset);
    for (Index i = 0; i < n; ++i)
        out.middleCols(col0_a + i * r_a, r_a).noalias() = j.middleCols(off + i * m, m) * y;
    out.middleCols(col0_b, r_b * m).setZero();
    for (Index i = 0; i < n; ++i) {
        const auto block = j.middleCols(off + i * m, m);
        for (Index k = 0; k < r_b; ++k) {
            const double c = x(i, k);
            if (c != 0.0) out.middleCols(col0_b + k * m, m) += c * block;
        }
    }
}

// dW = A Y^T + X B written row-major into p at `offset`.
inline void write_velocity(const DenseMatrix& a, const DenseMatrix& y, const DenseMatrix& x,
                           const DenseMatrix& b, std::size_t offset, ParameterVector& p) {
    const DenseMatrix w = a * y.transpose() + x * b;
    Index k = static_cast<Index>(offset);
    for (Index i = 0; i < w.rows(); ++i)
        for (Index jj = 0; jj < w.cols(); ++jj) p[k++] = w(i, jj);
}

}  // namespace detail

class SubspaceBasis {
public:
    SubspaceBasis() = default;
    SubspaceBasis(std::vector<LayerBasis> layers, std::vector<detail::LayerLayout> layout,
                  std::size_t parameter_count, BiasMode mode)
        : layers_(std::move(layers)), layout_(std::move(layout)),
          parameter_count_(parameter_count), bias_mode_(mode) {
        for (const auto& l : layout_) bias_count_ += static_cast<std::size_t>(l.rows);
    }

    const std::vector<LayerBasis>& layers() const noexcept { return layers_; }
    const LayerBasis& layer(std::size_t l) const { return layers_.at(l); }
    BiasMode bias_mode() const noexcept { return bias_mode_; }
    std::size_t parameter_count() const noexcept { return parameter_count_; }

    /// dim(gamma) = sum_l r_l (n_l + m_l) [+ number of biases].
    std::size_t dim() const noexcept {
        std::size_t d = 0;
        for (const auto& l : layers_) d += static_cast<std::size_t>(l.coefficient_count());
        if (bias_mode_ == BiasMode::unconstrained) d += bias_count_;
        return d;
    }

    std::size_t bias_count() const noexcept { return bias_count_; }

    /// gamma vector -> blocks. Layout: per layer A then B (row-major), then biases.
    VelocityCoefficients unflatten(const Vector& gamma) const {
        if (static_cast<std::size_t>(gamma.size()) != dim())
            throw ContractViolation("subspace: gamma has length " + std::to_string(gamma.size()) +
                                    ", expected " + std::to_string(dim()));
        VelocityCoefficients c;
        Index k = 0;
        for (const auto& l : layers_) {
            DenseMatrix a(l.rows(), l.rank()), b(l.rank(), l.cols());
            for (Index i = 0; i < a.rows(); ++i)
                for (Index j = 0; j < a.cols(); ++j) a(i, j) = gamma[k++];
            for (Index i = 0; i < b.rows(); ++i)
                for (Index j = 0; j < b.cols(); ++j) b(i, j) = gamma[k++];
            c.a_blocks.push_back(std::move(a));
            c.b_blocks.push_back(std::move(b));
        }
        if (bias_mode_ == BiasMode::unconstrained) c.bias_block = gamma.tail(static_cast<Index>(bias_count_));
        return c;
    }

    Vector flatten(const VelocityCoefficients& c) const {
        check_shapes(c);
        Vector gamma(static_cast<Index>(dim()));
        Index k = 0;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            for (Index i = 0; i < c.a_blocks[l].rows(); ++i)
                for (Index j = 0; j < c.a_blocks[l].cols(); ++j) gamma[k++] = c.a_blocks[l](i, j);
            for (Index i = 0; i < c.b_blocks[l].rows(); ++i)
                for (Index j = 0; j < c.b_blocks[l].cols(); ++j) gamma[k++] = c.b_blocks[l](i, j);
        }
        if (bias_mode_ == BiasMode::unconstrained) gamma.tail(c.bias_block.size()) = c.bias_block;
        return gamma;
    }

    void check_shapes(const VelocityCoefficients& c) const {
        if (c.a_blocks.size() != layers_.size() || c.b_blocks.size() != layers_.size())
            throw ContractViolation("subspace: coefficient block count mismatch");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& L = layers_[l];
            if (c.a_blocks[l].rows() != L.rows() || c.a_blocks[l].cols() != L.rank() ||
                c.b_blocks[l].rows() != L.rank() || c.b_blocks[l].cols() != L.cols())
                throw ContractViolation("subspace: coefficient block shape mismatch in layer " +
                                        std::to_string(l));
        }
        const std::size_t expected = bias_mode_ == BiasMode::unconstrained ? bias_count_ : 0;
        if (static_cast<std::size_t>(c.bias_block.size()) != expected)
            throw ContractViolation("subspace: bias block length mismatch");
    }

    const std::vector<detail::LayerLayout>& layout() const noexcept { return layout_; }

private:
    std::vector<LayerBasis> layers_;
    std::vector<detail::LayerLayout> layout_;
    std::size_t parameter_count_ = 0;
    std::size_t bias_count_ = 0;
    BiasMode bias_mode_ = BiasMode::unconstrained;
};

/// Rank-r SVD basis of every weight matrix of `net`. Per-layer rank is
/// min(r, n_l, m_l) minus any exactly-zero singular values in the window.
inline SubspaceBasis build_subspace(const MlpNetwork& net, Index r,
                                    BiasMode mode = BiasMode::unconstrained) {
    if (r < 1) throw ContractViolation("build_subspace: rank must be >= 1");
    std::vector<LayerBasis> layers;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const DenseMatrix& w = net.layer(l).weight;
        const linalg::TruncatedSvd t = linalg::truncated_svd(w, r);
        if (t.s[0] <= 0.0)
            throw RankDeficiencyError("build_subspace: weight matrix of layer " + std::to_string(l) +
                                      " is zero; restart from a regularized (nonzero) initialization");
        Index keep = 0;
        while (keep < t.rank() && t.s[keep] > kZeroSingularValue * t.s[0]) ++keep;
        LayerBasis b;
        b.u = t.u.leftCols(keep);
        b.s = t.s.head(keep);
        b.v = t.v.leftCols(keep);
        const Vector root = b.s.cwiseSqrt();
        b.left = b.u * root.asDiagonal();
        b.right = b.v * root.asDiagonal();
        b.requested_rank = r;
        b.dropped = t.rank() - keep;
        layers.push_back(std::move(b));
    }
    return SubspaceBasis(std::move(layers), detail::layout_of(net), net.parameter_count(), mode);
}

/// L_UV gamma: the full parameter velocity.
inline ParameterVector apply_luv(const SubspaceBasis& basis, const VelocityCoefficients& c) {
    basis.check_shapes(c);
    ParameterVector p = ParameterVector::Zero(static_cast<Index>(basis.parameter_count()));
    Index bias_k = 0;
    for (std::size_t l = 0; l < basis.layers().size(); ++l) {
        const LayerBasis& L = basis.layer(l);
        const auto& lay = basis.layout()[l];
        detail::write_velocity(c.a_blocks[l], L.right, L.left, c.b_blocks[l], lay.weight_offset, p);
        if (basis.bias_mode() == BiasMode::unconstrained) {
            p.segment(static_cast<Index>(lay.bias_offset), lay.rows) = c.bias_block.segment(bias_k, lay.rows);
            bias_k += lay.rows;
        }
    }
    return p;
}

inline ParameterVector apply_luv(const SubspaceBasis& basis, const Vector& gamma) {
    return apply_luv(basis, basis.unflatten(gamma));
}

/// J L_UV through the structured block product.
inline DenseMatrix assemble_jl(const DenseMatrix& j, const SubspaceBasis& basis) {
    if (static_cast<std::size_t>(j.cols()) != basis.parameter_count())
        throw ContractViolation("assemble_jl: Jacobian has " + std::to_string(j.cols()) +
                                " columns, expected " + std::to_string(basis.parameter_count()));
    DenseMatrix out(j.rows(), static_cast<Index>(basis.dim()));
    Index col = 0;
    for (std::size_t l = 0; l < basis.layers().size(); ++l) {
        const LayerBasis& L = basis.layer(l);
        const auto& lay = basis.layout()[l];
        detail::structured_block(j, lay.weight_offset, lay.rows, lay.cols, L.left, L.right, out, col,
                                 col + lay.rows * L.rank());
        col += L.coefficient_count();
    }
    if (basis.bias_mode() == BiasMode::unconstrained) {
        for (const auto& lay : basis.layout()) {
            out.middleCols(col, lay.rows) = j.middleCols(static_cast<Index>(lay.bias_offset), lay.rows);
            col += lay.rows;
        }
    }
    return out;
}

/// J L_UV by definition: column c is J apply_luv(e_c). Slow; for checking.
inline DenseMatrix assemble_jl_columnwise(const DenseMatrix& j, const SubspaceBasis& basis) {
    const Index dim = static_cast<Index>(basis.dim());
    DenseMatrix out(j.rows(), dim);
    for (Index c = 0; c < dim; ++c) out.col(c) = j * apply_luv(basis, Vector(Vector::Unit(dim, c)));
    return out;
}

/// W = M R for one weight matrix.
struct LowRankFactors {
    DenseMatrix m_factor;  // n x r
    DenseMatrix r_factor;  // r x m

    Index rank() const noexcept { return m_factor.cols(); }
    DenseMatrix product() const { return m_factor * r_factor; }
};

/// Gaussian factors with var(M) = 1/r and var(R) = 1/m, so M R has entries
/// of variance 1/m like a fan-in-scaled dense initialization.
inline LowRankFactors random_factors(Index n, Index m, Index r, std::uint64_t seed) {
    if (r < 1 || r > std::min(n, m)) throw ConfigError("random_factors: rank out of range");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    LowRankFactors f{DenseMatrix(n, r), DenseMatrix(r, m)};
    const double sm = 1.0 / std::sqrt(static_cast<double>(r));
    const double sr = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < r; ++k) f.m_factor(i, k) = sm * normal(rng);
    for (Index k = 0; k < r; ++k)
        for (Index j = 0; j < m; ++j) f.r_factor(k, j) = sr * normal(rng);
    return f;
}

/// Factored parameterization of one layer of a network; every parameter
/// outside that weight matrix is a free coordinate.
///
/// gamma = [dR (row-major), dM (row-major), free parameters in layout order].
class FactoredParameterization {
public:
    FactoredParameterization(const MlpNetwork& net, std::size_t layer, LowRankFactors factors)
        : layer_(layer), factors_(std::move(factors)), parameter_count_(net.parameter_count()) {
        if (layer >= net.layer_count()) throw ConfigError("factored: layer index out of range");
        const Layer& L = net.layer(layer);
        if (factors_.m_factor.rows() != L.rows() || factors_.r_factor.cols() != L.cols() ||
            factors_.m_factor.cols() != factors_.r_factor.rows())
            throw ContractViolation("factored: factor shapes do not match layer " + std::to_string(layer));
        offset_ = net.weight_offset(layer);
        rows_ = L.rows();
        cols_ = L.cols();
    }

    std::size_t layer() const noexcept { return layer_; }
    const LowRankFactors& factors() const noexcept { return factors_; }
    LowRankFactors& factors() noexcept { return factors_; }
    Index rank() const noexcept { return factors_.rank(); }

    std::size_t factor_dim() const noexcept {
        return static_cast<std::size_t>(rank() * (rows_ + cols_));
    }
    std::size_t free_dim() const noexcept {
        return parameter_count_ - static_cast<std::size_t>(rows_ * cols_);
    }
    std::size_t dim() const noexcept { return factor_dim() + free_dim(); }

    /// Splits gamma into (dM, dR, free).
    void split(const Vector& gamma, DenseMatrix& m_dot, DenseMatrix& r_dot, Vector& free) const {
        if (static_cast<std::size_t>(gamma.size()) != dim())
            throw ContractViolation("factored: gamma length mismatch");
        const Index r = rank();
        r_dot.resize(r, cols_);
        m_dot.resize(rows_, r);
        Index k = 0;
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < cols_; ++j) r_dot(i, j) = gamma[k++];
        for (Index i = 0; i < rows_; ++i)
            for (Index j = 0; j < r; ++j) m_dot(i, j) = gamma[k++];
        free = gamma.tail(static_cast<Index>(free_dim()));
    }

    /// T gamma in the full parameter layout.
    ParameterVector apply(const Vector& gamma) const {
        DenseMatrix m_dot, r_dot;
        Vector free;
        split(gamma, m_dot, r_dot, free);
        ParameterVector p = apply_factored(m_dot, r_dot);
        const Index off = static_cast<Index>(offset_);
        const Index block = rows_ * cols_;
        p.head(off) = free.head(off);
        p.tail(p.size() - off - block) = free.tail(free.size() - off);
        return p;
    }

    /// M dR + dM R in the parameter layout; zero everywhere else.
    ParameterVector apply_factored(const DenseMatrix& m_dot, const DenseMatrix& r_dot) const {
        if (m_dot.rows() != rows_ || m_dot.cols() != rank() || r_dot.rows() != rank() ||
            r_dot.cols() != cols_)
            throw ContractViolation("apply_factored_t: factor velocity shapes do not conform");
        ParameterVector p = ParameterVector::Zero(static_cast<Index>(parameter_count_));
        detail::write_velocity(m_dot, factors_.r_factor.transpose(), factors_.m_factor, r_dot, offset_, p);
        return p;
    }

    /// J T by blocks: [J_W (I kron M) | J_W (R^T kron I) | J_free].
    DenseMatrix assemble_jt(const DenseMatrix& j) const {
        if (static_cast<std::size_t>(j.cols()) != parameter_count_)
            throw ContractViolation("factored: Jacobian column count mismatch");
        DenseMatrix out(j.rows(), static_cast<Index>(dim()));
        const Index r = rank();
        // structured_block lays out A-columns first; here dR (the B role) leads.
        const Index col_r = 0;
        const Index col_m = r * cols_;
        detail::structured_block(j, offset_, rows_, cols_, factors_.m_factor,
                                 factors_.r_factor.transpose(), out, col_m, col_r);
        const Index off = static_cast<Index>(offset_);
        const Index fdim = static_cast<Index>(factor_dim());
        out.middleCols(fdim, off) = j.leftCols(off);
        const Index tail = j.cols() - off - rows_ * cols_;
        out.rightCols(tail) = j.rightCols(tail);
        return out;
    }

    /// Explicit T (P x dim); small problems and tests only.
    DenseMatrix explicit_t() const {
        const Index d = static_cast<Index>(dim());
        DenseMatrix t(static_cast<Index>(parameter_count_), d);
        for (Index c = 0; c < d; ++c) t.col(c) = apply(Vector(Vector::Unit(d, c)));
        return t;
    }

private:
    std::size_t layer_;
    LowRankFactors factors_;
    std::size_t parameter_count_;
    std::size_t offset_ = 0;
    Index rows_ = 0;
    Index cols_ = 0;
};

/// apply_factored_t for a bare layer: vec(M dR + dM R) row-major, n*m entries.
inline Vector apply_factored_t(const LowRankFactors& f, const DenseMatrix& m_dot,
                               const DenseMatrix& r_dot) {
    const Index n = f.m_factor.rows(), m = f.r_factor.cols(), r = f.rank();
    if (m_dot.rows() != n || m_dot.cols() != r || r_dot.rows() != r || r_dot.cols() != m)
        throw ContractViolation("apply_factored_t: factor velocity shapes do not conform");
    Vector p(n * m);
    detail::write_velocity(m_dot, f.r_factor.transpose(), f.m_factor, r_dot, 0, p);
    return p;
}

}  // namespace lrednn
