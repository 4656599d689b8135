#pragma once

// Initial-condition fit: minimizes 1/2 sum_i |u(x_i; W) - u_0(x_i)|^2 over
// the collocation grid.
//
// One deterministic trajectory: the first `adaptive_iterations` steps use a
// momentum-free adaptive gradient method (RMS-normalized steps of fixed
// size), the remaining steps are Levenberg-Marquardt on the exact
// Jacobian. The best iterate seen so far is what gets reported, so a
// longer budget can never report a larger loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "lrednn/errors.hpp"
#include "lrednn/grid.hpp"
#include "lrednn/linalg.hpp"
#include "lrednn/network.hpp"

namespace lrednn {

struct FitSettings {
    std::size_t iterations = 3000;
    std::size_t adaptive_iterations = 200;
    double step_size = 2e-3;
    /// Stop once the RMS pointwise error falls to this level.
    double rms_tolerance = 1e-5;
};

struct FitResult {
    MlpNetwork net;
    double loss = 0.0;           // best 1/2 sum of squares
    double rms_error = 0.0;      // sqrt(mean squared pointwise error) at the best iterate
    std::size_t iterations = 0;  // iterations actually executed
};

namespace detail {

inline Vector flatten_rows(const DenseMatrix& m) {
    Vector v(m.size());
    Index k = 0;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) v[k++] = m(i, j);
    return v;
}

}  // namespace detail

/// Fits `net` to `target` (M x q samples on `grid`).
inline FitResult fit_initial(MlpNetwork net, const CollocationGrid& grid, const DenseMatrix& target,
                             const FitSettings& settings = {}) {
    const Index q = static_cast<Index>(net.output_dim());
    if (target.rows() != static_cast<Index>(grid.size()) || target.cols() != q)
        throw ContractViolation("fit_initial: target must be M x q");
    if (!target.allFinite()) throw ContractViolation("fit_initial: target contains non-finite values");
    if (settings.adaptive_iterations > 0 && !(settings.step_size > 0.0))
        throw ConfigError("fit_initial: step size must be positive");

    const Vector y = detail::flatten_rows(target);
    const double count = static_cast<double>(y.size());
    auto residual_of = [&](const MlpNetwork& n) {
        return Vector(detail::flatten_rows(forward_on_grid(n, grid)) - y);
    };

    ParameterVector w = net.parameters();
    Vector r = residual_of(net);
    double loss = 0.5 * r.squaredNorm();

    FitResult best{net, loss, std::sqrt(2.0 * loss / count), 0};
    if (!std::isfinite(loss)) throw FitError("fit_initial: loss is not finite", 0);

    Vector second_moment = Vector::Zero(w.size());
    constexpr double kDecay = 0.999;
    constexpr double kEps = 1e-12;
    double damping = -1.0;  // set on first LM step

    std::size_t it = 0;
    for (; it < settings.iterations && best.rms_error > settings.rms_tolerance; ++it) {
        const DenseMatrix jac = param_jacobian(net, grid);
        const Vector grad = jac.transpose() * r;

        if (it < settings.adaptive_iterations) {
            second_moment = kDecay * second_moment + (1.0 - kDecay) * grad.cwiseAbs2();
            const double correction = 1.0 - std::pow(kDecay, static_cast<double>(it + 1));
            const Vector denom = (second_moment / correction).cwiseSqrt().array() + kEps;
            w -= settings.step_size * grad.cwiseQuotient(denom);
            net.set_parameters(w);
            r = residual_of(net);
            loss = 0.5 * r.squaredNorm();
        } else {
            const DenseMatrix g = linalg::gram(jac);
            const double mean_diag = std::max(g.trace() / static_cast<double>(g.rows()),
                                              std::numeric_limits<double>::min());
            if (damping < 0.0) damping = 1e-3 * mean_diag;
            bool accepted = false;
            for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
                const auto sol = linalg::solve_regularized_normal(g, grad, damping);
                const ParameterVector trial = w - sol.x;
                MlpNetwork candidate = net;
                candidate.set_parameters(trial);
                const Vector rt = residual_of(candidate);
                const double lt = 0.5 * rt.squaredNorm();
                if (std::isfinite(lt) && lt < loss) {
                    w = trial;
                    net = std::move(candidate);
                    r = rt;
                    loss = lt;
                    damping = std::max(damping / 3.0, 1e-15 * mean_diag);
                    accepted = true;
                } else {
                    damping *= 4.0;
                }
            }
            if (!accepted) {
                ++it;
                break;  // no descent direction left at any damping we try
            }
        }

        if (!std::isfinite(loss)) throw FitError("fit_initial: loss diverged", it + 1);
        if (loss < best.loss) {
            best.net = net;
            best.loss = loss;
            best.rms_error = std::sqrt(2.0 * loss / count);
        }
    }
    best.iterations = it;
    return best;
}

}  // namespace lrednn
