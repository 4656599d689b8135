#pragma once

// The spatial ansatz: a tanh MLP behind a fixed periodic embedding
//
//     x_j  ->  (sin(w x_j), cos(w x_j)),   w = pi for the domain [-1, 1],
//
// so every output is exactly periodic in each coordinate. Besides plain
// evaluation this header provides the spatial jet (value, gradient and pure
// second derivatives, propagated forward through the layers) and the exact
// parameter Jacobian (reverse sweep per output component).
//
// Parameter layout, shared by every flattened vector in the library:
//   W_0 (row-major), b_0, W_1 (row-major), b_1, ...

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lrednn/errors.hpp"
#include "lrednn/grid.hpp"
#include "lrednn/linalg.hpp"
#include "lrednn/parallel.hpp"

namespace lrednn {

enum class Activation { tanh, identity };

struct Layer {
    DenseMatrix weight;  // n x m (outputs x inputs)
    Vector bias;         // n
    Activation activation = Activation::tanh;

    Index rows() const noexcept { return weight.rows(); }
    Index cols() const noexcept { return weight.cols(); }
    std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(weight.size() + bias.size());
    }
};

struct PeriodicEmbedding {
    bool enabled = true;
    double frequency = std::numbers::pi;
};

/// Flattened parameters (or parameter velocities) in the layout above.
using ParameterVector = Vector;

class MlpNetwork {
public:
    MlpNetwork() = default;

    MlpNetwork(std::size_t input_dim, PeriodicEmbedding embedding, std::vector<Layer> layers)
        : input_dim_(input_dim), embedding_(embedding), layers_(std::move(layers)) {
        if (input_dim_ == 0) throw ConfigError("network: input dimension must be positive");
        if (layers_.empty()) throw ConfigError("network: at least one layer is required");
        Index fan_in = static_cast<Index>(embedded_dim());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& layer = layers_[l];
            if (layer.cols() != fan_in)
                throw ConfigError("network: layer " + std::to_string(l) + " expects " +
                                  std::to_string(layer.cols()) + " inputs, previous width is " +
                                  std::to_string(fan_in));
            if (layer.bias.size() != layer.rows() || layer.rows() == 0)
                throw ConfigError("network: bias/weight size mismatch in layer " + std::to_string(l));
            fan_in = layer.rows();
        }
        if (layers_.back().activation != Activation::identity)
            throw ConfigError("network: final activation must be identity");
        offsets_.reserve(layers_.size());
        std::size_t off = 0;
        for (const Layer& layer : layers_) {
            offsets_.push_back(off);
            off += layer.parameter_count();
        }
        parameter_count_ = off;
    }

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept {
        return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().rows());
    }
    std::size_t embedded_dim() const noexcept {
        return embedding_.enabled ? 2 * input_dim_ : input_dim_;
    }
    const PeriodicEmbedding& embedding() const noexcept { return embedding_; }
    std::size_t parameter_count() const noexcept { return parameter_count_; }
    std::size_t layer_count() const noexcept { return layers_.size(); }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const Layer& layer(std::size_t l) const { return layers_.at(l); }

    /// Offset of W_l in the flattened layout; b_l follows at + W_l.size().
    std::size_t weight_offset(std::size_t l) const { return offsets_.at(l); }
    std::size_t bias_offset(std::size_t l) const {
        return offsets_.at(l) + static_cast<std::size_t>(layers_.at(l).weight.size());
    }

    ParameterVector parameters() const {
        ParameterVector p(static_cast<Index>(parameter_count_));
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& layer = layers_[l];
            Index k = static_cast<Index>(offsets_[l]);
            for (Index i = 0; i < layer.rows(); ++i)
                for (Index j = 0; j < layer.cols(); ++j) p[k++] = layer.weight(i, j);
            for (Index i = 0; i < layer.rows(); ++i) p[k++] = layer.bias[i];
        }
        return p;
    }

    void set_parameters(const ParameterVector& p) {
        if (static_cast<std::size_t>(p.size()) != parameter_count_)
            throw ContractViolation("network: parameter vector has length " +
                                    std::to_string(p.size()) + ", expected " +
                                    std::to_string(parameter_count_));
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Layer& layer = layers_[l];
            Index k = static_cast<Index>(offsets_[l]);
            for (Index i = 0; i < layer.rows(); ++i)
                for (Index j = 0; j < layer.cols(); ++j) layer.weight(i, j) = p[k++];
            for (Index i = 0; i < layer.rows(); ++i) layer.bias[i] = p[k++];
        }
    }

    void set_weight(std::size_t l, const DenseMatrix& w) {
        Layer& layer = layers_.at(l);
        if (w.rows() != layer.rows() || w.cols() != layer.cols())
            throw ContractViolation("network: weight shape mismatch in layer " + std::to_string(l));
        layer.weight = w;
    }

    void set_bias(std::size_t l, const Vector& b) {
        Layer& layer = layers_.at(l);
        if (b.size() != layer.rows())
            throw ContractViolation("network: bias length mismatch in layer " + std::to_string(l));
        layer.bias = b;
    }

private:
    std::size_t input_dim_ = 0;
    PeriodicEmbedding embedding_;
    std::vector<Layer> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t parameter_count_ = 0;
};

/// Layer widths of an MLP: input_dim -> hidden... -> output_dim.
struct Architecture {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 1;
    bool periodic_embedding = true;
};

/// Weights ~ N(0, 1/fan_in), biases zero, tanh hidden layers.
inline MlpNetwork init_network(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim == 0 || arch.output_dim == 0)
        throw ConfigError("network: input and output dimensions must be positive");
    for (auto h : arch.hidden)
        if (h == 0) throw ConfigError("network: hidden widths must be positive");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    PeriodicEmbedding emb;
    emb.enabled = arch.periodic_embedding;

    std::vector<std::size_t> widths;
    widths.push_back(emb.enabled ? 2 * arch.input_dim : arch.input_dim);
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(arch.output_dim);

    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const Index n = static_cast<Index>(widths[l + 1]);
        const Index m = static_cast<Index>(widths[l]);
        const double scale = 1.0 / std::sqrt(static_cast<double>(m));
        Layer layer;
        layer.weight.resize(n, m);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < m; ++j) layer.weight(i, j) = scale * normal(rng);
        layer.bias = Vector::Zero(n);
        layer.activation = (l + 2 == widths.size()) ? Activation::identity : Activation::tanh;
        layers.push_back(std::move(layer));
    }
    return MlpNetwork(arch.input_dim, emb, std::move(layers));
}

/// Value, gradient and pure second derivatives of the network output.
struct SpatialJet {
    Vector value;         // q
    DenseMatrix gradient; // q x d, d u_i / d x_j
    DenseMatrix second;   // q x d, d^2 u_i / d x_j^2

    Vector laplacian() const { return second.rowwise().sum(); }
};

namespace detail {

inline void embed(const MlpNetwork& net, const Vector& x, Vector& a, DenseMatrix* da,
                  DenseMatrix* dda) {
    const Index d = static_cast<Index>(net.input_dim());
    if (x.size() != d)
        throw ContractViolation("network: coordinate has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(d));
    const Index e = static_cast<Index>(net.embedded_dim());
    a.resize(e);
    if (da) da->setZero(e, d);
    if (dda) dda->setZero(e, d);
    if (!net.embedding().enabled) {
        a = x;
        if (da) da->setIdentity();
        return;
    }
    const double w = net.embedding().frequency;
    for (Index j = 0; j < d; ++j) {
        const double s = std::sin(w * x[j]);
        const double c = std::cos(w * x[j]);
        a[2 * j] = s;
        a[2 * j + 1] = c;
        if (da) {
            (*da)(2 * j, j) = w * c;
            (*da)(2 * j + 1, j) = -w * s;
        }
        if (dda) {
            (*dda)(2 * j, j) = -w * w * s;
            (*dda)(2 * j + 1, j) = -w * w * c;
        }
    }
}

inline void activate(Activation act, const Vector& z, Vector& a, Vector& d1, Vector& d2) {
    if (act == Activation::identity) {
        a = z;
        d1.setOnes(z.size());
        d2.setZero(z.size());
        return;
    }
    a = z.array().tanh();
    d1 = 1.0 - a.array().square();
    d2 = -2.0 * a.array() * d1.array();
}

// Forward pass keeping what the reverse sweep needs.
struct Tape {
    std::vector<Vector> inputs;  // input to layer l
    std::vector<Vector> slopes;  // activation'(z_l)
};

inline Vector forward_tape(const MlpNetwork& net, const Vector& x, Tape* tape) {
    Vector a, d1, d2;
    embed(net, x, a, nullptr, nullptr);
    if (tape) {
        tape->inputs.clear();
        tape->slopes.clear();
    }
    for (const Layer& layer : net.layers()) {
        if (tape) tape->inputs.push_back(a);
        const Vector z = layer.weight * a + layer.bias;
        Vector next;
        activate(layer.activation, z, next, d1, d2);
        if (tape) tape->slopes.push_back(d1);
        a = std::move(next);
    }
    return a;
}

// Writes d u_k / dW for every output k into rows [row0, row0 + q) of jac.
inline void jacobian_rows(const MlpNetwork& net, const Tape& tape, DenseMatrix& jac, Index row0) {
    const std::size_t depth = net.layer_count();
    const Index q = static_cast<Index>(net.output_dim());
    Vector delta;
    for (Index k = 0; k < q; ++k) {
        delta = Vector::Zero(q);
        delta[k] = 1.0;
        for (std::size_t l = depth; l-- > 0;) {
            const Layer& layer = net.layer(l);
            delta.array() *= tape.slopes[l].array();
            const Vector& in = tape.inputs[l];
            Index off = static_cast<Index>(net.weight_offset(l));
            for (Index i = 0; i < layer.rows(); ++i) {
                const double di = delta[i];
                for (Index j = 0; j < layer.cols(); ++j) jac(row0 + k, off++) = di * in[j];
            }
            for (Index i = 0; i < layer.rows(); ++i) jac(row0 + k, off++) = delta[i];
            if (l > 0) delta = layer.weight.transpose() * delta;
        }
    }
}

}  // namespace detail

inline Vector forward(const MlpNetwork& net, const Vector& x) {
    return detail::forward_tape(net, x, nullptr);
}

inline SpatialJet spatial_jet(const MlpNetwork& net, const Vector& x) {
    Vector a, d1, d2;
    DenseMatrix da, dda;
    detail::embed(net, x, a, &da, &dda);
    for (const Layer& layer : net.layers()) {
        const Vector z = layer.weight * a + layer.bias;
        const DenseMatrix dz = layer.weight * da;
        const DenseMatrix ddz = layer.weight * dda;
        detail::activate(layer.activation, z, a, d1, d2);
        da = d1.asDiagonal() * dz;
        dda = d2.asDiagonal() * dz.cwiseProduct(dz);
        dda += d1.asDiagonal() * ddz;
    }
    return SpatialJet{a, da, dda};
}

/// (M q) x P Jacobian of the outputs at the grid points, point-major rows.
inline DenseMatrix param_jacobian(const MlpNetwork& net, const CollocationGrid& grid) {
    const Index q = static_cast<Index>(net.output_dim());
    DenseMatrix jac(static_cast<Index>(grid.size()) * q, static_cast<Index>(net.parameter_count()));
    parallel_for(grid.size(), [&](std::size_t i) {
        detail::Tape tape;
        detail::forward_tape(net, grid.point(i), &tape);
        detail::jacobian_rows(net, tape, jac, static_cast<Index>(i) * q);
    });
    return jac;
}

/// Everything one time step needs from the network on the grid.
struct GridEvaluation {
    std::vector<SpatialJet> jets;  // per point
    DenseMatrix jacobian;          // (M q) x P, empty unless requested

    /// M x q matrix of output values.
    DenseMatrix values() const {
        if (jets.empty()) return {};
        DenseMatrix v(static_cast<Index>(jets.size()), jets.front().value.size());
        for (std::size_t i = 0; i < jets.size(); ++i) v.row(static_cast<Index>(i)) = jets[i].value;
        return v;
    }
};

inline GridEvaluation evaluate_on_grid(const MlpNetwork& net, const CollocationGrid& grid,
                                       bool with_jacobian) {
    const Index q = static_cast<Index>(net.output_dim());
    GridEvaluation out;
    out.jets.resize(grid.size());
    if (with_jacobian)
        out.jacobian.resize(static_cast<Index>(grid.size()) * q,
                            static_cast<Index>(net.parameter_count()));
    parallel_for(grid.size(), [&](std::size_t i) {
        const Vector x = grid.point(i);
        out.jets[i] = spatial_jet(net, x);
        if (with_jacobian) {
            detail::Tape tape;
            detail::forward_tape(net, x, &tape);
            detail::jacobian_rows(net, tape, out.jacobian, static_cast<Index>(i) * q);
        }
    });
    return out;
}

/// M x q matrix of outputs at the grid points.
inline DenseMatrix forward_on_grid(const MlpNetwork& net, const CollocationGrid& grid) {
    DenseMatrix v(static_cast<Index>(grid.size()), static_cast<Index>(net.output_dim()));
    parallel_for(grid.size(), [&](std::size_t i) {
        v.row(static_cast<Index>(i)) = forward(net, grid.point(i)).transpose();
    });
    return v;
}

}  // namespace lrednn
