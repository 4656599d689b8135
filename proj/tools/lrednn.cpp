// lrednn: run experiments, rank sweeps, and list the built-in presets.
//
//   lrednn run --config <path|preset:NAME> [--rank n|full] [--out dir] [--seed n] [--scale f]
//   lrednn sweep --config <path|preset:NAME> --ranks 1,2,3 [--out dir] [--scale f]
//   lrednn presets
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrednn/config.hpp"
#include "lrednn/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    double scale = 1.0;
};

lrednn::ExperimentConfig resolve(const Common& o) {
    lrednn::ExperimentConfig c = lrednn::load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.scale != 1.0) lrednn::apply_scale(c, o.scale);
    if (!o.out.empty()) c.output_dir = o.out;
    return c;
}

std::vector<lrednn::Index> parse_ranks(const std::string& text) {
    std::vector<lrednn::Index> ranks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || v < 1) throw lrednn::ConfigError("--ranks: '" + item + "' is not a positive integer");
        ranks.push_back(static_cast<lrednn::Index>(v));
    }
    return ranks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank evolutionary deep neural network PDE solver"};
    app.require_subcommand(1);

    Common run_opts;
    std::string rank_text;
    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--config", run_opts.config, "Config file, or preset:NAME")->required();
    run->add_option("--rank", rank_text, "Override rank: a positive integer or 'full'");
    run->add_option("--out", run_opts.out, "Output directory (overrides output.dir)");
    run->add_option("--seed", run_opts.seed, "Override network.seed");
    run->add_option("--scale", run_opts.scale, "Scale grid points per dimension and step count");

    Common sweep_opts;
    std::string ranks_text;
    auto* sweep = app.add_subcommand("sweep", "Run every rank plus the full baseline and compare");
    sweep->add_option("--config", sweep_opts.config, "Config file, or preset:NAME")->required();
    sweep->add_option("--ranks", ranks_text, "Comma-separated ranks (default: output.sweep_ranks)");
    sweep->add_option("--out", sweep_opts.out, "Output directory (overrides output.dir)");
    sweep->add_option("--seed", sweep_opts.seed, "Override network.seed");
    sweep->add_option("--scale", sweep_opts.scale, "Scale grid points per dimension and step count");

    auto* presets = app.add_subcommand("presets", "List built-in presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (presets->parsed()) {
            for (const std::string& name : lrednn::preset_names()) {
                const lrednn::ExperimentConfig c = lrednn::preset(name);
                std::cout << name << ": " << lrednn::equation_name(c.equation) << ", " << c.points << "^"
                          << c.spatial_dim() << " grid, dt " << c.dt << ", " << c.steps << " steps, rank "
                          << c.rank_label() << ", sweep ranks " << lrednn::detail::join(c.sweep_ranks) << "\n";
            }
            return 0;
        }
        if (run->parsed()) {
            lrednn::ExperimentConfig c = resolve(run_opts);
            if (!rank_text.empty()) {
                c.rank = lrednn::detail::parse_rank("--rank", rank_text);
            }
            const lrednn::RunReport r = lrednn::run_experiment(c, c.output_dir, &std::cerr);
            std::cout << r.directory.string() << "\n";
            return 0;
        }
        lrednn::ExperimentConfig c = resolve(sweep_opts);
        const std::vector<lrednn::Index> ranks = ranks_text.empty() ? c.sweep_ranks : parse_ranks(ranks_text);
        if (ranks.empty()) {
            std::cerr << "lrednn sweep: no ranks given (--ranks 1,2,3 or output.sweep_ranks)\n";
            return kConfigError;
        }
        const auto entries = lrednn::run_rank_sweep(c, ranks, c.output_dir, &std::cerr);
        bool all_ok = true;
        for (const auto& e : entries) all_ok = all_ok && e.report.status == "ok";
        std::cout << c.output_dir << "\n";
        return all_ok ? 0 : kNumericalError;
    } catch (const lrednn::ConfigError& e) {
        std::cerr << "lrednn: " << e.what() << "\n";
        return kConfigError;
    } catch (const lrednn::NumericalError& e) {
        std::cerr << "lrednn: numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "lrednn: " << e.what() << "\n";
        return 1;
    }
}
