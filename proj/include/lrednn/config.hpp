#pragma once

// Experiment configuration: a flat key = value text format with [sections],
// and the built-in presets.
//
//     experiment = ac1d_case1     # a preset name loads its defaults first
//     [time]
//     steps = 500                 # later keys override
//
// Sections and keys:
//   (top)     experiment
//   [pde]     equation (heat1d | pme_drift | allen_cahn | burgers), dim,
//             epsilon, diffusivity, viscosity, initial (initial-condition tag)
//   [grid]    points (per dimension, on the periodic box [-1, 1]^d)
//   [time]    dt, steps
//   [network] hidden (comma list), seed, output_bias
//   [solver]  rank (full | n), mode (standard | factored_init), factored_layer,
//             init_rank, lambda, lambda_scale (relative | absolute),
//             method (normal | orthogonal), bias (unconstrained | frozen),
//             basis_refresh
//   [fit]     iterations, adaptive_iterations, step_size, rms_tolerance,
//             gate, enforce_gate
//   [output]  dir, snapshot_every (0: ten per run), sweep_ranks, scale
//
// `experiment` (a preset name or "custom") must come first: it resets every
// setting. '#' starts a comment. Unknown sections or keys are errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lrednn/errors.hpp"
#include "lrednn/evolve.hpp"
#include "lrednn/fit.hpp"
#include "lrednn/pde.hpp"

namespace lrednn {

enum class InitMode { standard, factored_init };

struct ExperimentConfig {
    std::string experiment = "custom";

    PdeKind equation = PdeKind::heat1d;
    std::size_t dim = 1;
    double epsilon = 0.1;
    double diffusivity = 1.0;
    double viscosity = 0.05;
    std::string initial = "heat1d";

    std::size_t points = 64;

    double dt = 1e-5;
    std::size_t steps = 2000;

    std::vector<std::size_t> hidden{10, 10};
    std::uint64_t seed = 7;
    double output_bias = 0.0;

    std::optional<Index> rank;  // empty: full EDNN solve
    InitMode mode = InitMode::standard;
    std::size_t factored_layer = 1;
    Index init_rank = 5;  // factor rank for factored_init with rank = full
    double lambda = 1e-8;
    bool lambda_relative = true;
    LeastSquaresMethod method = LeastSquaresMethod::normal_equations;
    BiasMode bias = BiasMode::unconstrained;
    std::size_t basis_refresh = 1;

    FitSettings fit;
    double fit_gate = 1e-3;
    bool enforce_gate = true;

    std::string output_dir = "runs/out";
    std::size_t snapshot_every = 0;
    std::vector<Index> sweep_ranks;
    double scale = 1.0;

    std::size_t output_dim() const { return equation == PdeKind::burgers_2d ? 2 : 1; }
    std::size_t spatial_dim() const {
        switch (equation) {
            case PdeKind::heat1d: return 1;
            case PdeKind::allen_cahn: return dim;
            default: return 2;
        }
    }
    PdeOperator make_operator() const {
        switch (equation) {
            case PdeKind::heat1d: return PdeOperator::heat1d(diffusivity);
            case PdeKind::pme_drift_2d: return PdeOperator::pme_drift();
            case PdeKind::allen_cahn: return PdeOperator::allen_cahn(dim, epsilon);
            case PdeKind::burgers_2d: return PdeOperator::burgers(viscosity);
        }
        throw ConfigError("config: unknown equation");
    }
    CollocationGrid make_grid() const { return CollocationGrid::periodic_box(spatial_dim(), points); }
    Architecture architecture() const { return {spatial_dim(), hidden, output_dim(), true}; }
    SolverOptions solver() const {
        SolverOptions o;
        o.lambda = lambda;
        o.relative = lambda_relative;
        o.method = method;
        return o;
    }
    std::size_t snapshot_cadence() const {
        return snapshot_every > 0 ? snapshot_every : std::max<std::size_t>(1, steps / 10);
    }
    std::string rank_label() const { return rank ? std::to_string(*rank) : "full"; }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("config: '" + key + "' expects a real number, got '" + v + "'");
    return out;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<std::uint64_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_count(key, item));
    }
    return out;
}

inline std::optional<Index> parse_rank(const std::string& key, const std::string& v) {
    if (v == "full") return std::nullopt;
    const auto r = parse_count(key, v);
    if (r < 1) throw ConfigError("config: '" + key + "' must be 'full' or a positive integer");
    return static_cast<Index>(r);
}

inline std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
    return out;
}

}  // namespace detail

inline std::string_view equation_name(PdeKind k) {
    switch (k) {
        case PdeKind::heat1d: return "heat1d";
        case PdeKind::pme_drift_2d: return "pme_drift";
        case PdeKind::allen_cahn: return "allen_cahn";
        case PdeKind::burgers_2d: return "burgers";
    }
    return "unknown";
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"heat1d",     "pme_drift",  "ac1d_case1",    "ac1d_case2",
                                                "ac2d_case1", "ac2d_case2", "burgers_short", "burgers_long"};
    return names;
}

/// Built-in experiment; throws ConfigError for an unknown name.
inline ExperimentConfig preset(std::string_view name) {
    ExperimentConfig c;
    c.experiment = std::string(name);
    c.output_dir = "runs/" + std::string(name);
    if (name == "heat1d") {
        c.equation = PdeKind::heat1d;
        c.initial = "heat1d";
        c.points = 64;
        c.dt = 1e-5;
        c.steps = 2000;
        c.hidden = {10, 10};
        c.sweep_ranks = {1, 2};
    } else if (name == "pme_drift") {
        c.equation = PdeKind::pme_drift_2d;
        c.initial = "none";
        c.points = 64;
        c.dt = 1e-4;
        c.steps = 4000;
        c.hidden = {28, 14};  // middle weight matrix is 14 x 28
        c.output_bias = 1.0;
        c.mode = InitMode::factored_init;
        c.factored_layer = 1;
        c.rank = 5;
        c.sweep_ranks = {3, 5};
    } else if (name == "ac1d_case1" || name == "ac1d_case2") {
        const bool sharp = name == "ac1d_case2";
        c.equation = PdeKind::allen_cahn;
        c.dim = 1;
        c.initial = "ac1d";
        c.epsilon = sharp ? 0.01 : 0.1;
        c.points = 256;
        c.dt = sharp ? 1e-5 : 1e-4;
        c.steps = 2000;
        c.hidden = {15, 13};  // middle weight matrix is 13 x 15
        c.rank = sharp ? 3 : 2;
        c.sweep_ranks = sharp ? std::vector<Index>{2, 3} : std::vector<Index>{1, 2};
    } else if (name == "ac2d_case1" || name == "ac2d_case2") {
        const bool sharp = name == "ac2d_case2";
        c.equation = PdeKind::allen_cahn;
        c.dim = 2;
        c.initial = "ac2d";
        c.epsilon = sharp ? 0.01 : 0.1;
        c.points = 101;
        c.dt = sharp ? 1e-7 : 1e-5;
        c.steps = 2000;
        c.hidden = {26, 20};  // middle weight matrix is 20 x 26
        c.rank = sharp ? 5 : 3;
        c.sweep_ranks = sharp ? std::vector<Index>{2, 5} : std::vector<Index>{1, 3};
    } else if (name == "burgers_short" || name == "burgers_long") {
        c.equation = PdeKind::burgers_2d;
        c.initial = "burgers";
        c.viscosity = 0.05;
        c.points = 64;
        c.dt = 1e-3;
        c.steps = name == "burgers_long" ? 1000 : 300;
        c.hidden = {20, 20};  // middle weight matrix is 20 x 20
        c.rank = 7;
        c.sweep_ranks = {4, 7};
    } else {
        throw ConfigError("config: unknown preset '" + std::string(name) + "' (see `lrednn presets`)");
    }
    return c;
}

/// Halves (for f = 0.5) grid points per dimension and step count.
inline void apply_scale(ExperimentConfig& c, double f) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("config: scale must be positive");
    c.points = std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(static_cast<double>(c.points) * f)));
    c.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(c.steps) * f)));
    if (c.snapshot_every > 0)
        c.snapshot_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(c.snapshot_every) * f)));
    c.scale *= f;
}

/// Rejects inconsistent settings; called by every loader.
inline void validate(const ExperimentConfig& c) {
    if (!(c.dt > 0.0)) throw ConfigError("config: dt must be > 0");
    if (c.steps < 1) throw ConfigError("config: steps must be >= 1");
    if (c.rank && *c.rank < 1) throw ConfigError("config: rank must be >= 1");
    if (c.points < 2) throw ConfigError("config: grid needs at least 2 points per dimension");
    if (c.hidden.empty() || std::find(c.hidden.begin(), c.hidden.end(), 0u) != c.hidden.end())
        throw ConfigError("config: network.hidden needs positive widths");
    if (c.equation == PdeKind::allen_cahn && c.dim != 1 && c.dim != 2)
        throw ConfigError("config: allen_cahn dim must be 1 or 2");
    if (c.basis_refresh < 1) throw ConfigError("config: basis_refresh must be >= 1");
    if (c.lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    if (!(c.fit_gate > 0.0)) throw ConfigError("config: fit gate must be > 0");
    if (!(c.scale > 0.0)) throw ConfigError("config: scale must be > 0");
    c.make_operator();  // operator-specific parameter checks
    if (c.mode == InitMode::factored_init) {
        if (c.factored_layer >= c.hidden.size() + 1)
            throw ConfigError("config: factored_layer out of range");
        const Index factor_rank = c.rank.value_or(c.init_rank);
        const std::size_t n = c.factored_layer < c.hidden.size() ? c.hidden[c.factored_layer] : c.output_dim();
        const std::size_t m = c.factored_layer == 0 ? 2 * c.spatial_dim() : c.hidden[c.factored_layer - 1];
        if (factor_rank < 1 || static_cast<std::size_t>(factor_rank) > std::min(n, m))
            throw ConfigError("config: factor rank " + std::to_string(factor_rank) + " exceeds min(" +
                              std::to_string(n) + ", " + std::to_string(m) + ") of layer " +
                              std::to_string(c.factored_layer));
    } else {
        if (c.initial == "none")
            throw ConfigError("config: standard mode needs an initial condition (pde.initial)");
        initial_condition(c.initial);  // throws for unknown tags
    }
    for (Index r : c.sweep_ranks)
        if (r < 1) throw ConfigError("config: sweep ranks must be >= 1");
}

/// Applies one key (qualified as "section.key", or bare for the top level).
inline void set_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    if (key == "experiment") {
        if (v == "custom") c = ExperimentConfig{};
        else c = preset(v);
    } else if (key == "pde.equation") {
        if (v == "heat1d") c.equation = PdeKind::heat1d;
        else if (v == "pme_drift") c.equation = PdeKind::pme_drift_2d;
        else if (v == "allen_cahn") c.equation = PdeKind::allen_cahn;
        else if (v == "burgers") c.equation = PdeKind::burgers_2d;
        else throw ConfigError("config: unknown equation '" + v + "'");
    } else if (key == "pde.dim") {
        c.dim = parse_count(key, v);
    } else if (key == "pde.epsilon") {
        c.epsilon = parse_real(key, v);
    } else if (key == "pde.diffusivity") {
        c.diffusivity = parse_real(key, v);
    } else if (key == "pde.viscosity") {
        c.viscosity = parse_real(key, v);
    } else if (key == "pde.initial") {
        c.initial = v;
    } else if (key == "grid.points") {
        c.points = parse_count(key, v);
    } else if (key == "time.dt") {
        c.dt = parse_real(key, v);
    } else if (key == "time.steps") {
        c.steps = parse_count(key, v);
    } else if (key == "network.hidden") {
        const auto xs = parse_list(key, v);
        c.hidden.assign(xs.begin(), xs.end());
    } else if (key == "network.seed") {
        c.seed = parse_count(key, v);
    } else if (key == "network.output_bias") {
        c.output_bias = parse_real(key, v);
    } else if (key == "solver.rank") {
        c.rank = parse_rank(key, v);
    } else if (key == "solver.mode") {
        if (v == "standard") c.mode = InitMode::standard;
        else if (v == "factored_init") c.mode = InitMode::factored_init;
        else throw ConfigError("config: solver.mode must be standard or factored_init");
    } else if (key == "solver.factored_layer") {
        c.factored_layer = parse_count(key, v);
    } else if (key == "solver.init_rank") {
        c.init_rank = static_cast<Index>(parse_count(key, v));
    } else if (key == "solver.lambda") {
        c.lambda = parse_real(key, v);
    } else if (key == "solver.lambda_scale") {
        if (v == "relative") c.lambda_relative = true;
        else if (v == "absolute") c.lambda_relative = false;
        else throw ConfigError("config: solver.lambda_scale must be relative or absolute");
    } else if (key == "solver.method") {
        if (v == "normal") c.method = LeastSquaresMethod::normal_equations;
        else if (v == "orthogonal") c.method = LeastSquaresMethod::orthogonal;
        else throw ConfigError("config: solver.method must be normal or orthogonal");
    } else if (key == "solver.bias") {
        if (v == "unconstrained") c.bias = BiasMode::unconstrained;
        else if (v == "frozen") c.bias = BiasMode::frozen;
        else throw ConfigError("config: solver.bias must be unconstrained or frozen");
    } else if (key == "solver.basis_refresh") {
        c.basis_refresh = parse_count(key, v);
    } else if (key == "fit.iterations") {
        c.fit.iterations = parse_count(key, v);
    } else if (key == "fit.adaptive_iterations") {
        c.fit.adaptive_iterations = parse_count(key, v);
    } else if (key == "fit.step_size") {
        c.fit.step_size = parse_real(key, v);
    } else if (key == "fit.rms_tolerance") {
        c.fit.rms_tolerance = parse_real(key, v);
    } else if (key == "fit.gate") {
        c.fit_gate = parse_real(key, v);
    } else if (key == "fit.enforce_gate") {
        c.enforce_gate = parse_bool(key, v);
    } else if (key == "output.dir") {
        c.output_dir = v;
    } else if (key == "output.snapshot_every") {
        c.snapshot_every = parse_count(key, v);
    } else if (key == "output.sweep_ranks") {
        c.sweep_ranks.clear();
        if (v == "none") return;
        const auto xs = parse_list(key, v);
        for (auto x : xs) c.sweep_ranks.push_back(static_cast<Index>(x));
    } else if (key == "output.scale") {
        c.scale = parse_real(key, v);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

/// Parses config text; `origin` names the source in error messages.
inline ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<text>") {
    ExperimentConfig c;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    bool any_key = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        std::string line = detail::trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "parse error: unterminated section header");
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            static const char* known[] = {"pde", "grid", "time", "network", "solver", "fit", "output"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known))
                throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "parse error: expected key = value");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + "parse error: empty key or value");
        if (key == "experiment" && (any_key || !section.empty()))
            throw ConfigError(where + "'experiment' must be the first key (it resets every setting)");
        any_key = true;
        try {
            set_key(c, section.empty() ? key : section + "." + key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    validate(c);
    return c;
}

/// Reads a config file, or a built-in preset given as "preset:NAME".
inline ExperimentConfig load_config(const std::string& path) {
    if (path.rfind("preset:", 0) == 0) {
        ExperimentConfig c = preset(path.substr(7));
        validate(c);
        return c;
    }
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

/// Full config in the loader's format; parse_config(to_text(c)) == c.
inline std::string to_text(const ExperimentConfig& c) {
    using detail::format_real;
    std::ostringstream os;
    os << "experiment = " << c.experiment << "\n"
       << "\n[pde]\n"
       << "equation = " << equation_name(c.equation) << "\n"
       << "dim = " << c.dim << "\n"
       << "epsilon = " << format_real(c.epsilon) << "\n"
       << "diffusivity = " << format_real(c.diffusivity) << "\n"
       << "viscosity = " << format_real(c.viscosity) << "\n"
       << "initial = " << c.initial << "\n"
       << "\n[grid]\npoints = " << c.points << "\n"
       << "\n[time]\ndt = " << format_real(c.dt) << "\nsteps = " << c.steps << "\n"
       << "\n[network]\nhidden = " << detail::join(c.hidden) << "\nseed = " << c.seed
       << "\noutput_bias = " << format_real(c.output_bias) << "\n"
       << "\n[solver]\nrank = " << c.rank_label() << "\n"
       << "mode = " << (c.mode == InitMode::factored_init ? "factored_init" : "standard") << "\n"
       << "factored_layer = " << c.factored_layer << "\n"
       << "init_rank = " << c.init_rank << "\n"
       << "lambda = " << format_real(c.lambda) << "\n"
       << "lambda_scale = " << (c.lambda_relative ? "relative" : "absolute") << "\n"
       << "method = " << (c.method == LeastSquaresMethod::orthogonal ? "orthogonal" : "normal") << "\n"
       << "bias = " << (c.bias == BiasMode::frozen ? "frozen" : "unconstrained") << "\n"
       << "basis_refresh = " << c.basis_refresh << "\n"
       << "\n[fit]\niterations = " << c.fit.iterations << "\n"
       << "adaptive_iterations = " << c.fit.adaptive_iterations << "\n"
       << "step_size = " << format_real(c.fit.step_size) << "\n"
       << "rms_tolerance = " << format_real(c.fit.rms_tolerance) << "\n"
       << "gate = " << format_real(c.fit_gate) << "\n"
       << "enforce_gate = " << (c.enforce_gate ? "true" : "false") << "\n"
       << "\n[output]\ndir = " << c.output_dir << "\n"
       << "snapshot_every = " << c.snapshot_every << "\n"
       << "sweep_ranks = " << (c.sweep_ranks.empty() ? "none" : detail::join(c.sweep_ranks)) << "\n"
       << "scale = " << format_real(c.scale) << "\n";
    return os.str();
}

}  // namespace lrednn
