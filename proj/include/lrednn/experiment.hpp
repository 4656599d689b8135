#pragma once

// Experiment runner: builds the initial network (fit or factored init),
// evolves it, and writes a run directory
//
//     config.txt                 loader-format echo of the resolved config
//     diagnostics.csv            step,time,energy,residual,step_seconds,total_seconds,gamma_dim
//     summary.csv                one row
//     snapshots/u_step{n}.csv    x[,y],component,value
//
// All reals are written with 17 significant digits. On failure whatever was
// computed is still written before the error propagates.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lrednn/config.hpp"
#include "lrednn/errors.hpp"
#include "lrednn/evolve.hpp"
#include "lrednn/fit.hpp"

namespace lrednn {

struct RunReport {
    ExperimentConfig config;
    std::filesystem::path directory;
    double fit_rms = 0.0;  // 0 for factored init
    EvolutionResult result;
    MlpNetwork final_net;
    std::size_t parameter_count = 0;
    std::size_t gamma_dim = 0;
    std::string status = "ok";  // "ok" or the failure message
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << std::setprecision(17);
    return f;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace detail

inline void write_diagnostics(const std::filesystem::path& file, const std::vector<StepRecord>& rows) {
    auto f = detail::open_out(file);
    f << "step,time,energy,residual,step_seconds,total_seconds,gamma_dim\n";
    for (const StepRecord& r : rows)
        f << r.step << ',' << r.time << ',' << r.energy << ',' << r.residual << ',' << r.step_seconds << ','
          << r.total_seconds << ',' << r.gamma_dim << '\n';
}

inline void write_snapshot(const std::filesystem::path& file, const CollocationGrid& grid, const DenseMatrix& values) {
    auto f = detail::open_out(file);
    f << (grid.dim() == 1 ? "x" : grid.dim() == 2 ? "x,y" : "x,y,z") << ",component,value\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vector x = grid.point(i);
        for (Index c = 0; c < values.cols(); ++c) {
            for (Index j = 0; j < x.size(); ++j) f << x[j] << ',';
            f << c << ',' << values(static_cast<Index>(i), c) << '\n';
        }
    }
}

inline std::filesystem::path snapshot_path(const std::filesystem::path& dir, std::size_t step) {
    return dir / "snapshots" / ("u_step" + std::to_string(step) + ".csv");
}

inline void write_summary(const std::filesystem::path& file, const RunReport& r) {
    const ExperimentConfig& c = r.config;
    const EvolutionResult& e = r.result;
    double solve = 0.0;
    for (const auto& d : e.diagnostics) solve += d.solve_seconds;
    auto f = detail::open_out(file);
    f << "experiment,equation,mode,rank,scale,points,dt,steps,seed,lambda,lambda_scale,method,fit_rms,"
         "energy_functional,initial_energy,final_energy,final_residual,completed_steps,total_seconds,"
         "solve_seconds,parameter_count,gamma_dim,status\n";
    f << c.experiment << ',' << equation_name(c.equation) << ','
      << (c.mode == InitMode::factored_init ? "factored_init" : "standard") << ',' << c.rank_label() << ','
      << c.scale << ',' << c.points << ',' << c.dt << ',' << c.steps << ',' << c.seed << ',' << c.lambda << ','
      << (c.lambda_relative ? "relative" : "absolute") << ','
      << (c.method == LeastSquaresMethod::orthogonal ? "orthogonal" : "normal") << ',' << r.fit_rms << ','
      << detail::csv_escape(std::string(c.make_operator().energy_label())) << ',' << e.initial_energy << ','
      << e.final_energy << ',' << e.final_residual << ',' << e.completed_steps << ','
      << (e.diagnostics.empty() ? 0.0 : e.diagnostics.back().total_seconds) << ',' << solve << ','
      << r.parameter_count << ',' << r.gamma_dim << ',' << detail::csv_escape(r.status) << '\n';
}

/// Initial network for `c`: fitted to the initial condition, or (factored
/// init) random rank-r factors in the chosen layer. Returns the fit RMS
/// error (0 for factored init).
inline std::pair<MlpNetwork, double> initial_network(const ExperimentConfig& c) {
    MlpNetwork net = init_network(c.architecture(), c.seed);
    if (c.output_bias != 0.0) {
        const std::size_t last = net.layer_count() - 1;
        net.set_bias(last, Vector::Constant(net.layer(last).rows(), c.output_bias));
    }
    if (c.mode == InitMode::factored_init) {
        const Layer& L = net.layer(c.factored_layer);
        net.set_weight(c.factored_layer, random_factors(L.rows(), L.cols(), c.rank.value_or(c.init_rank), c.seed).product());
        return {net, 0.0};
    }
    const CollocationGrid grid = c.make_grid();
    const FitResult fit = fit_initial(net, grid, sample_field(initial_condition(c.initial), grid, c.output_dim()), c.fit);
    if (c.enforce_gate && fit.rms_error > c.fit_gate) {
        std::ostringstream os;
        os << "initial fit RMS error " << fit.rms_error << " exceeds the gate " << c.fit_gate
           << " (raise fit.iterations or set fit.enforce_gate = false)";
        throw FitError(os.str(), fit.iterations);
    }
    return {fit.net, fit.rms_error};
}

/// Runs one experiment into `dir`. `start` overrides the initial network
/// (standard mode only; used by sweeps to share one fit).
inline RunReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                std::ostream* log = nullptr,
                                std::optional<std::pair<MlpNetwork, double>> start = std::nullopt) {
    validate(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(dir / "snapshots");
    {
        auto f = detail::open_out(dir / "config.txt");
        f << to_text(cfg);
    }

    RunReport rep;
    rep.config = cfg;
    rep.directory = dir;
    const CollocationGrid grid = cfg.make_grid();

    auto flush = [&] {
        write_diagnostics(dir / "diagnostics.csv", rep.result.diagnostics);
        for (const Snapshot& s : rep.result.snapshots) write_snapshot(snapshot_path(dir, s.step), grid, s.values);
        write_summary(dir / "summary.csv", rep);
    };

    try {
        auto [net, fit_rms] = (start && cfg.mode == InitMode::standard) ? *start : initial_network(cfg);
        rep.fit_rms = fit_rms;
        rep.parameter_count = net.parameter_count();
        if (log) {
            *log << "[" << cfg.experiment << " rank=" << cfg.rank_label() << "] P=" << rep.parameter_count;
            if (cfg.mode == InitMode::standard) *log << " fit rms=" << fit_rms;
            *log << ", " << cfg.steps << " steps\n";
        }

        EvolutionSettings s;
        s.op = cfg.make_operator();
        s.grid = grid;
        s.dt = cfg.dt;
        s.steps = cfg.steps;
        s.bias_mode = cfg.bias;
        s.solver = cfg.solver();
        s.basis_refresh = cfg.basis_refresh;
        s.snapshot_every = cfg.snapshot_cadence();
        if (cfg.mode == InitMode::factored_init && cfg.rank) {
            const Layer& L = net.layer(cfg.factored_layer);
            s.mode = SolveMode::factored;
            s.factored.emplace(net, cfg.factored_layer, random_factors(L.rows(), L.cols(), *cfg.rank, cfg.seed));
        } else if (cfg.rank) {
            s.mode = SolveMode::lowrank;
            s.rank = *cfg.rank;
        }
        evolve(s, net, rep.result);
        rep.final_net = net;
        rep.gamma_dim = rep.result.diagnostics.empty() ? 0 : rep.result.diagnostics.back().gamma_dim;
    } catch (const std::exception& e) {
        rep.status = e.what();
        if (!rep.result.diagnostics.empty()) rep.gamma_dim = rep.result.diagnostics.back().gamma_dim;
        flush();
        throw;
    }
    flush();
    if (log)
        *log << "[" << cfg.experiment << " rank=" << cfg.rank_label() << "] done: energy "
             << rep.result.initial_energy << " -> " << rep.result.final_energy << ", "
             << rep.result.diagnostics.back().total_seconds << " s\n";
    return rep;
}

/// Final-snapshot differences between two runs on the same grid:
/// L2 = sqrt(cell_volume * sum e^2) over points and components, and L-inf.
struct FieldDifference {
    double l2 = 0.0;
    double linf = 0.0;
};

inline FieldDifference field_difference(const CollocationGrid& grid, const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractViolation("field_difference: shape mismatch");
    const DenseMatrix e = a - b;
    return {std::sqrt(grid.cell_volume() * e.squaredNorm()), e.size() ? e.cwiseAbs().maxCoeff() : 0.0};
}

struct SweepEntry {
    std::string label;  // rank number or "full"
    RunReport report;
    FieldDifference vs_full;
    bool compared = false;
};

/// One run per rank plus the full baseline, each in its own subdirectory
/// (rank_N, full), and sweep_summary.csv comparing final snapshots with the
/// full run. A failing rank is recorded and the sweep continues.
inline std::vector<SweepEntry> run_rank_sweep(const ExperimentConfig& cfg, const std::vector<Index>& ranks,
                                              const std::filesystem::path& dir, std::ostream* log = nullptr) {
    if (ranks.empty()) throw ConfigError("sweep: rank list is empty");
    for (Index r : ranks)
        if (r < 1) throw ConfigError("sweep: ranks must be >= 1");
    validate(cfg);
    std::filesystem::create_directories(dir);

    std::optional<std::pair<MlpNetwork, double>> start;
    if (cfg.mode == InitMode::standard) start = initial_network(cfg);

    std::vector<SweepEntry> entries;
    auto run_one = [&](std::optional<Index> rank, const std::string& label) {
        ExperimentConfig c = cfg;
        c.rank = rank;
        SweepEntry e;
        e.label = label;
        try {
            e.report = run_experiment(c, dir / (rank ? "rank_" + label : label), log, start);
        } catch (const std::exception& ex) {
            e.report.config = c;
            e.report.status = ex.what();
            if (log) *log << "[" << cfg.experiment << " rank=" << label << "] failed: " << ex.what() << "\n";
        }
        entries.push_back(std::move(e));
    };
    for (Index r : ranks) run_one(r, std::to_string(r));
    run_one(std::nullopt, "full");

    const SweepEntry& full = entries.back();
    const CollocationGrid grid = cfg.make_grid();
    const bool full_ok = full.report.status == "ok";
    for (SweepEntry& e : entries) {
        if (full_ok && e.report.status == "ok") {
            e.vs_full = field_difference(grid, e.report.result.snapshots.back().values,
                                         full.report.result.snapshots.back().values);
            e.compared = true;
        }
    }

    auto f = detail::open_out(dir / "sweep_summary.csv");
    f << "rank,status,l2_vs_full,linf_vs_full,total_seconds,solve_seconds,gamma_dim,final_energy\n";
    for (const SweepEntry& e : entries) {
        const auto& d = e.report.result.diagnostics;
        double solve = 0.0;
        for (const auto& s : d) solve += s.solve_seconds;
        f << e.label << ',' << detail::csv_escape(e.report.status) << ',';
        if (e.compared) f << e.vs_full.l2 << ',' << e.vs_full.linf;
        else f << "nan,nan";
        f << ',' << (d.empty() ? 0.0 : d.back().total_seconds) << ',' << solve << ',' << e.report.gamma_dim << ','
          << e.report.result.final_energy << '\n';
    }
    return entries;
}

}  // namespace lrednn
