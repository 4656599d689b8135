#pragma once

// Time evolution: at every step assemble the Jacobian J and operator vector
// N on the grid, solve the (possibly reduced) least-squares problem for
// the parameter velocity through its normal equations, and take a forward
// Euler step.
//
//   full      : (J^T J + lambda I) dW = J^T N
//   lowrank   : SVD subspace rebuilt from the current weights, solve for
//               gamma in ((J L)^T (J L) + lambda I) gamma = (J L)^T N,
//               dW = L gamma
//   factored  : one layer kept as W = M R; solve for (dR, dM, free) and
//               step the factors themselves, so that layer keeps rank r.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lrednn/errors.hpp"
#include "lrednn/grid.hpp"
#include "lrednn/linalg.hpp"
#include "lrednn/network.hpp"
#include "lrednn/pde.hpp"
#include "lrednn/subspace.hpp"

namespace lrednn {

enum class LeastSquaresMethod {
    normal_equations,  // form G = A^T A and factor it (Cholesky / eigen)
    orthogonal,        // factor A itself (SVD or QR); slower, cond(A) instead of cond(A)^2
};

/// How a velocity least-squares problem is solved. The shift lambda is
/// either absolute or relative to trace(G) / dim(G) of the system at hand.
struct SolverOptions {
    double lambda = 1e-8;
    bool relative = true;
    LeastSquaresMethod method = LeastSquaresMethod::normal_equations;

    SolverOptions() = default;
    SolverOptions(double absolute) : lambda(absolute), relative(false) {}  // NOLINT(implicit)

    static SolverOptions relative_shift(double rel,
                                        LeastSquaresMethod m = LeastSquaresMethod::normal_equations) {
        SolverOptions o;
        o.lambda = rel;
        o.relative = true;
        o.method = m;
        return o;
    }

    static SolverOptions minimum_norm(LeastSquaresMethod m = LeastSquaresMethod::normal_equations) {
        SolverOptions o(0.0);
        o.method = m;
        return o;
    }
};

struct VelocitySolution {
    Vector gamma;             // reduced unknowns (equals w_dot for the full solve)
    ParameterVector w_dot;    // full parameter velocity
    double residual_norm = 0; // |J w_dot - N|_2
    std::size_t system_dim = 0;
    double condition_estimate = 1.0;
    double lambda = 0.0;      // absolute shift actually used
};

namespace detail {

inline VelocitySolution solve_reduced(const DenseMatrix& jl, const Vector& n, const SolverOptions& opt) {
    if (jl.rows() != n.size())
        throw ContractViolation("velocity solve: Jacobian has " + std::to_string(jl.rows()) +
                                " rows but N has " + std::to_string(n.size()) + " entries");
    VelocitySolution out;
    linalg::NormalSolution sol;
    if (opt.method == LeastSquaresMethod::orthogonal) {
        out.lambda = opt.relative && jl.cols() > 0
                         ? opt.lambda * jl.squaredNorm() / static_cast<double>(jl.cols())
                         : opt.lambda;
        sol = linalg::least_squares(jl, n, out.lambda);
    } else {
        const DenseMatrix g = linalg::gram(jl);
        out.lambda = opt.relative ? linalg::relative_shift(g, opt.lambda) : opt.lambda;
        sol = linalg::solve_regularized_normal(g, jl.transpose() * n, out.lambda);
    }
    out.gamma = sol.x;
    out.condition_estimate = sol.condition_estimate;
    out.system_dim = static_cast<std::size_t>(jl.cols());
    return out;
}

}  // namespace detail

inline VelocitySolution solve_velocity_full(const DenseMatrix& j, const Vector& n,
                                            const SolverOptions& opt = {}) {
    VelocitySolution out = detail::solve_reduced(j, n, opt);
    out.w_dot = out.gamma;
    out.residual_norm = (j * out.w_dot - n).norm();
    return out;
}

inline VelocitySolution solve_velocity_lowrank(const DenseMatrix& j, const Vector& n,
                                               const SubspaceBasis& basis,
                                               const SolverOptions& opt = {}) {
    const DenseMatrix jl = assemble_jl(j, basis);
    VelocitySolution out = detail::solve_reduced(jl, n, opt);
    out.w_dot = apply_luv(basis, out.gamma);
    out.residual_norm = (j * out.w_dot - n).norm();
    return out;
}

struct FactoredVelocity {
    DenseMatrix m_dot;
    DenseMatrix r_dot;
    Vector free;  // velocities of every parameter outside the factored layer
    VelocitySolution solution;
};

inline FactoredVelocity solve_velocity_factored(const DenseMatrix& j, const Vector& n,
                                                const FactoredParameterization& fp,
                                                const SolverOptions& opt = {}) {
    const DenseMatrix jt = fp.assemble_jt(j);
    FactoredVelocity out;
    out.solution = detail::solve_reduced(jt, n, opt);
    fp.split(out.solution.gamma, out.m_dot, out.r_dot, out.free);
    out.solution.w_dot = fp.apply(out.solution.gamma);
    out.solution.residual_norm = (j * out.solution.w_dot - n).norm();
    return out;
}

/// W + dt * w_dot. Throws StepError on a non-finite velocity.
inline MlpNetwork euler_step(const MlpNetwork& net, const ParameterVector& w_dot, double dt,
                             std::size_t step = 0) {
    if (!(dt > 0.0)) throw ContractViolation("euler_step: dt must be positive");
    if (static_cast<std::size_t>(w_dot.size()) != net.parameter_count())
        throw ContractViolation("euler_step: velocity length mismatch");
    if (!w_dot.allFinite()) throw StepError("euler_step: non-finite parameter velocity", step);
    MlpNetwork next = net;
    next.set_parameters(net.parameters() + dt * w_dot);
    return next;
}

/// J, N and jets of the current state on the grid.
struct StepSystem {
    DenseMatrix jacobian;  // (M q) x P
    Vector n;              // M q, point-major then component
    std::vector<SpatialJet> jets;
    double energy = 0.0;
};

inline StepSystem assemble_system(const MlpNetwork& net, const CollocationGrid& grid,
                                  const PdeOperator& op) {
    if (net.input_dim() != op.spatial_dim() || net.output_dim() != op.output_dim())
        throw ContractViolation("assemble_system: network and operator dimensions disagree");
    GridEvaluation ev = evaluate_on_grid(net, grid, true);
    StepSystem s;
    const Index q = static_cast<Index>(op.output_dim());
    s.n.resize(static_cast<Index>(grid.size()) * q);
    parallel_for(grid.size(), [&](std::size_t i) {
        s.n.segment(static_cast<Index>(i) * q, q) = op.evaluate(grid.point(i), ev.jets[i]);
    });
    s.energy = op.energy(grid, ev.jets);
    s.jacobian = std::move(ev.jacobian);
    s.jets = std::move(ev.jets);
    return s;
}

enum class SolveMode { full, lowrank, factored };

inline std::string_view to_string(SolveMode m) {
    switch (m) {
        case SolveMode::full: return "full";
        case SolveMode::lowrank: return "lowrank";
        case SolveMode::factored: return "factored";
    }
    return "unknown";
}

struct EvolutionSettings {
    PdeOperator op = PdeOperator::heat1d(1.0);
    CollocationGrid grid;
    double dt = 1e-4;
    std::size_t steps = 1;
    SolveMode mode = SolveMode::full;
    Index rank = 1;  // lowrank only
    BiasMode bias_mode = BiasMode::unconstrained;
    SolverOptions solver = SolverOptions::relative_shift(1e-8);
    std::size_t basis_refresh = 1;   // rebuild the SVD basis every k steps
    std::size_t snapshot_every = 0;  // 0: no intermediate snapshots
    std::optional<FactoredParameterization> factored;  // required for SolveMode::factored
};

struct StepRecord {
    std::size_t step = 0;
    double time = 0.0;
    double energy = 0.0;
    double residual = 0.0;
    double step_seconds = 0.0;   // assembly + solve + update
    double solve_seconds = 0.0;  // basis + reduced system + solve + reconstruction
    double total_seconds = 0.0;
    std::size_t gamma_dim = 0;
    double condition_estimate = 1.0;
    Index evolving_rank = -1;    // numerical rank of the factored layer, -1 otherwise
};

struct Snapshot {
    std::size_t step = 0;
    double time = 0.0;
    DenseMatrix values;  // M x q
};

struct EvolutionResult {
    std::vector<StepRecord> diagnostics;
    std::vector<Snapshot> snapshots;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double final_residual = 0.0;
    std::size_t completed_steps = 0;
    bool completed = false;
    std::optional<LowRankFactors> final_factors;  // factored mode only
};

/// Numerical rank with the library-wide zero threshold.
inline Index numerical_rank(const DenseMatrix& a) {
    const linalg::SvdResult s = linalg::svd(a);
    if (s.s[0] == 0.0) return 0;
    Index k = 0;
    while (k < s.rank() && s.s[k] > kZeroSingularValue * s.s[0]) ++k;
    return k;
}

/// Runs the time loop from `net`, advancing it in place. `out` holds
/// everything recorded so far even if a step throws.
inline void evolve(const EvolutionSettings& cfg, MlpNetwork& net, EvolutionResult& out) {
    using clock = std::chrono::steady_clock;
    if (!(cfg.dt > 0.0)) throw ConfigError("evolve: dt must be positive");
    if (cfg.steps < 1) throw ConfigError("evolve: steps must be >= 1");
    if (cfg.mode == SolveMode::lowrank && cfg.rank < 1) throw ConfigError("evolve: rank must be >= 1");
    std::optional<FactoredParameterization> factored = cfg.factored;
    if (cfg.mode == SolveMode::factored) {
        if (!factored) throw ConfigError("evolve: factored mode needs initial factors");
        net.set_weight(factored->layer(), factored->factors().product());
    }

    const std::size_t refresh = cfg.basis_refresh == 0 ? 1 : cfg.basis_refresh;
    out = EvolutionResult{};
    out.snapshots.push_back({0, 0.0, forward_on_grid(net, cfg.grid)});

    SubspaceBasis basis;
    double total = 0.0;
    for (std::size_t n = 0; n < cfg.steps; ++n) {
        const auto t0 = clock::now();
        StepSystem sys = assemble_system(net, cfg.grid, cfg.op);
        if (n == 0) out.initial_energy = sys.energy;
        if (!std::isfinite(sys.energy) || !sys.n.allFinite())
            throw StepError("evolve: state became non-finite", n);

        const auto s0 = clock::now();
        VelocitySolution sol;
        std::optional<FactoredVelocity> fv;
        switch (cfg.mode) {
            case SolveMode::full:
                sol = solve_velocity_full(sys.jacobian, sys.n, cfg.solver);
                break;
            case SolveMode::lowrank:
                if (n % refresh == 0) basis = build_subspace(net, cfg.rank, cfg.bias_mode);
                sol = solve_velocity_lowrank(sys.jacobian, sys.n, basis, cfg.solver);
                break;
            case SolveMode::factored:
                fv = solve_velocity_factored(sys.jacobian, sys.n, *factored, cfg.solver);
                sol = fv->solution;
                break;
        }
        const auto s1 = clock::now();

        if (!sol.w_dot.allFinite()) throw StepError("evolve: non-finite parameter velocity", n);
        Index evolving_rank = -1;
        if (fv) {
            LowRankFactors& f = factored->factors();
            // Free coordinates follow W directly; the factors carry the layer.
            MlpNetwork next = euler_step(net, sol.w_dot, cfg.dt, n);
            f.m_factor += cfg.dt * fv->m_dot;
            f.r_factor += cfg.dt * fv->r_dot;
            next.set_weight(factored->layer(), f.product());
            net = std::move(next);
            out.final_factors = f;
            evolving_rank = numerical_rank(net.layer(factored->layer()).weight);
        } else {
            net = euler_step(net, sol.w_dot, cfg.dt, n);
        }
        const auto t1 = clock::now();

        const double step_s = std::chrono::duration<double>(t1 - t0).count();
        total += step_s;
        out.diagnostics.push_back({n, static_cast<double>(n) * cfg.dt, sys.energy, sol.residual_norm,
                                   step_s, std::chrono::duration<double>(s1 - s0).count(), total,
                                   sol.system_dim, sol.condition_estimate, evolving_rank});
        out.completed_steps = n + 1;
        out.final_residual = sol.residual_norm;

        const std::size_t done = n + 1;
        if (done == cfg.steps || (cfg.snapshot_every > 0 && done % cfg.snapshot_every == 0))
            out.snapshots.push_back({done, static_cast<double>(done) * cfg.dt, forward_on_grid(net, cfg.grid)});
    }
    const GridEvaluation last = evaluate_on_grid(net, cfg.grid, false);
    out.final_energy = cfg.op.energy(cfg.grid, last.jets);
    if (!std::isfinite(out.final_energy)) throw StepError("evolve: final state is non-finite", cfg.steps);
    out.completed = true;
}

}  // namespace lrednn
