#pragma once

// Pointwise right-hand sides N(u) of the benchmark equations, evaluated from
// analytic spatial jets of the network, together with the per-equation
// energy diagnostics and closed-form initial/exact fields.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lrednn/errors.hpp"
#include "lrednn/grid.hpp"
#include "lrednn/linalg.hpp"
#include "lrednn/network.hpp"

namespace lrednn {

enum class PdeKind { heat1d, pme_drift_2d, allen_cahn, burgers_2d };

inline std::string_view to_string(PdeKind k) {
    switch (k) {
        case PdeKind::heat1d: return "heat1d";
        case PdeKind::pme_drift_2d: return "pme_drift_2d";
        case PdeKind::allen_cahn: return "allen_cahn";
        case PdeKind::burgers_2d: return "burgers_2d";
    }
    return "unknown";
}

class PdeOperator {
public:
    static PdeOperator heat1d(double diffusivity) {
        if (!(diffusivity > 0.0)) throw ConfigError("heat1d: diffusivity must be positive");
        PdeOperator op(PdeKind::heat1d, 1, 1);
        op.diffusivity_ = diffusivity;
        return op;
    }

    /// du/dt = div(grad(u^m)) - div(V u) with m = 2 and
    /// V = (1 - sin(pi x) sin(pi y)) (1, 1).
    static PdeOperator pme_drift() { return PdeOperator(PdeKind::pme_drift_2d, 2, 1); }

    /// du/dt = eps^2 lap(u) - u (u^2 - 1) / eps^2, in 1 or 2 dimensions.
    static PdeOperator allen_cahn(std::size_t dim, double epsilon) {
        if (dim != 1 && dim != 2) throw ConfigError("allen_cahn: dimension must be 1 or 2");
        if (!(epsilon > 0.0)) throw ConfigError("allen_cahn: epsilon must be positive");
        PdeOperator op(PdeKind::allen_cahn, dim, 1);
        op.epsilon_ = epsilon;
        return op;
    }

    /// Viscous Burgers for the velocity (u, v).
    static PdeOperator burgers(double viscosity) {
        if (!(viscosity > 0.0)) throw ConfigError("burgers: viscosity must be positive");
        PdeOperator op(PdeKind::burgers_2d, 2, 2);
        op.viscosity_ = viscosity;
        return op;
    }

    PdeKind kind() const noexcept { return kind_; }
    std::size_t spatial_dim() const noexcept { return dim_; }
    std::size_t output_dim() const noexcept { return q_; }
    double diffusivity() const noexcept { return diffusivity_; }
    double epsilon() const noexcept { return epsilon_; }
    double viscosity() const noexcept { return viscosity_; }

    /// Short description of the energy functional used by energy().
    std::string_view energy_label() const {
        switch (kind_) {
            case PdeKind::heat1d: return "dirichlet_half_grad_sq";
            case PdeKind::pme_drift_2d: return "surrogate_l2_u_sq";
            case PdeKind::allen_cahn: return "ginzburg_landau";
            case PdeKind::burgers_2d: return "kinetic";
        }
        return "";
    }

    /// Drift field component (both components are equal).
    static double drift(double x, double y) {
        using std::numbers::pi;
        return 1.0 - std::sin(pi * x) * std::sin(pi * y);
    }

    static double drift_divergence(double x, double y) {
        using std::numbers::pi;
        return -pi * std::cos(pi * x) * std::sin(pi * y) - pi * std::sin(pi * x) * std::cos(pi * y);
    }

    Vector evaluate(const Vector& x, const SpatialJet& jet) const {
        const Index d = static_cast<Index>(dim_);
        const Index q = static_cast<Index>(q_);
        if (x.size() != d || jet.value.size() != q || jet.gradient.rows() != q ||
            jet.gradient.cols() != d || jet.second.rows() != q || jet.second.cols() != d)
            throw ContractViolation("pde " + std::string(to_string(kind_)) +
                                    ": jet shape does not match operator");
        Vector out(q);
        switch (kind_) {
            case PdeKind::heat1d:
                out[0] = diffusivity_ * jet.second(0, 0);
                break;
            case PdeKind::pme_drift_2d: {
                const double u = jet.value[0];
                const double ux = jet.gradient(0, 0), uy = jet.gradient(0, 1);
                const double lap = jet.second(0, 0) + jet.second(0, 1);
                const double v = drift(x[0], x[1]);
                // lap(u^2) = 2(|grad u|^2 + u lap u); div(V u) = V.grad u + u div V.
                out[0] = 2.0 * (ux * ux + uy * uy + u * lap) -
                         (v * (ux + uy) + u * drift_divergence(x[0], x[1]));
                break;
            }
            case PdeKind::allen_cahn: {
                const double u = jet.value[0];
                const double e2 = epsilon_ * epsilon_;
                out[0] = e2 * jet.second.row(0).sum() - u * (u * u - 1.0) / e2;
                break;
            }
            case PdeKind::burgers_2d: {
                const double u = jet.value[0], v = jet.value[1];
                for (Index c = 0; c < 2; ++c)
                    out[c] = viscosity_ * jet.second.row(c).sum() -
                             (u * jet.gradient(c, 0) + v * jet.gradient(c, 1));
                break;
            }
        }
        return out;
    }

    /// Riemann-sum energy from samples: values M x q, gradients per point (q x d).
    double energy(const CollocationGrid& grid, const DenseMatrix& values,
                  const std::vector<DenseMatrix>& gradients) const {
        if (values.rows() != static_cast<Index>(grid.size()) ||
            values.cols() != static_cast<Index>(q_) || gradients.size() != grid.size())
            throw ContractViolation("energy: samples do not cover the grid");
        double sum = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Index r = static_cast<Index>(i);
            switch (kind_) {
                case PdeKind::heat1d:
                    sum += 0.5 * gradients[i].squaredNorm();
                    break;
                case PdeKind::pme_drift_2d:
                    sum += values(r, 0) * values(r, 0);
                    break;
                case PdeKind::allen_cahn: {
                    const double u = values(r, 0);
                    const double e2 = epsilon_ * epsilon_;
                    const double w = u * u - 1.0;
                    sum += 0.5 * e2 * gradients[i].squaredNorm() + w * w / (4.0 * e2);
                    break;
                }
                case PdeKind::burgers_2d:
                    sum += 0.5 * values.row(r).squaredNorm();
                    break;
            }
        }
        return sum * grid.cell_volume();
    }

    double energy(const CollocationGrid& grid, const std::vector<SpatialJet>& jets) const {
        DenseMatrix values(static_cast<Index>(jets.size()), static_cast<Index>(q_));
        std::vector<DenseMatrix> grads;
        grads.reserve(jets.size());
        for (std::size_t i = 0; i < jets.size(); ++i) {
            values.row(static_cast<Index>(i)) = jets[i].value;
            grads.push_back(jets[i].gradient);
        }
        return energy(grid, values, grads);
    }

private:
    PdeOperator(PdeKind k, std::size_t d, std::size_t q) : kind_(k), dim_(d), q_(q) {}

    PdeKind kind_;
    std::size_t dim_;
    std::size_t q_;
    double diffusivity_ = 1.0;
    double epsilon_ = 0.1;
    double viscosity_ = 0.05;
};

/// e^{-kappa pi^2 t} sin(pi x): periodic heat solution for u_0 = sin(pi x).
inline double exact_heat_1d(double x, double t, double diffusivity) {
    if (t < 0.0) throw ContractViolation("exact_heat_1d: t must be >= 0");
    using std::numbers::pi;
    return std::exp(-diffusivity * pi * pi * t) * std::sin(pi * x);
}

/// Closed-form initial field: coordinate -> q values.
using FieldFunction = std::function<Vector(const Vector&)>;

/// Initial fields by experiment family: heat1d, ac1d, ac2d, burgers.
inline FieldFunction initial_condition(std::string_view tag) {
    using std::numbers::pi;
    if (tag == "heat1d")
        return [](const Vector& x) { return Vector::Constant(1, std::sin(pi * x[0])); };
    if (tag == "ac1d")
        return [](const Vector& x) { return Vector::Constant(1, 0.08 * std::sin(pi * x[0])); };
    if (tag == "ac2d")
        return [](const Vector& x) {
            return Vector::Constant(1, 0.15 * std::sin(pi * x[0]) * std::sin(pi * x[1]));
        };
    if (tag == "burgers")
        return [](const Vector& x) {
            Vector uv(2);
            uv[0] = -std::sin(pi * (x[0] + 1.0)) * std::cos(pi * (x[1] + 1.0));
            uv[1] = std::cos(pi * (x[0] + 1.0)) * std::sin(pi * (x[1] + 1.0));
            return uv;
        };
    if (tag == "pme_drift")
        throw ConfigError("initial_condition: pme_drift starts from a random factored network, "
                          "it has no closed-form field");
    throw ConfigError("initial_condition: unknown experiment tag '" + std::string(tag) + "'");
}

/// Samples a field on the grid as an M x q matrix.
inline DenseMatrix sample_field(const FieldFunction& f, const CollocationGrid& grid, std::size_t q) {
    DenseMatrix out(static_cast<Index>(grid.size()), static_cast<Index>(q));
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.row(static_cast<Index>(i)) = f(grid.point(i)).transpose();
    return out;
}

}  // namespace lrednn
