#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lrednn/config.hpp"

using namespace lrednn;

TEST(Presets, BenchmarkCases) {
    const ExperimentConfig ac2 = load_config("preset:ac2d_case2");
    EXPECT_EQ(ac2.epsilon, 0.01);
    EXPECT_EQ(ac2.dt, 1e-7);
    EXPECT_EQ(ac2.steps, 2000u);
    EXPECT_EQ(ac2.points, 101u);
    EXPECT_EQ(ac2.spatial_dim(), 2u);

    const ExperimentConfig pme = load_config("preset:pme_drift");
    EXPECT_EQ(pme.points, 64u);
    EXPECT_EQ(pme.dt, 1e-4);
    EXPECT_EQ(pme.steps, 4000u);
    EXPECT_EQ(pme.mode, InitMode::factored_init);
    EXPECT_EQ(pme.sweep_ranks, (std::vector<Index>{3, 5}));

    const ExperimentConfig ac1 = preset("ac1d_case1");
    EXPECT_EQ(ac1.epsilon, 0.1);
    EXPECT_EQ(ac1.dt, 1e-4);
    EXPECT_EQ(ac1.steps, 2000u);

    const ExperimentConfig bl = preset("burgers_long");
    EXPECT_EQ(bl.dt, 1e-3);
    EXPECT_EQ(bl.steps, 1000u);
    EXPECT_EQ(bl.output_dim(), 2u);
    EXPECT_EQ(preset("burgers_short").steps, 300u);

    const ExperimentConfig heat = preset("heat1d");
    EXPECT_EQ(heat.points, 64u);
    EXPECT_EQ(heat.dt, 1e-5);
    EXPECT_EQ(heat.diffusivity, 1.0);
    EXPECT_FALSE(heat.rank.has_value());
}

TEST(Presets, WeightMatrixShapes) {
    auto middle = [](const ExperimentConfig& c) {
        const MlpNetwork net = init_network(c.architecture(), 1);
        return std::pair<Index, Index>(net.layer(1).rows(), net.layer(1).cols());
    };
    EXPECT_EQ(middle(preset("pme_drift")), (std::pair<Index, Index>(14, 28)));
    EXPECT_EQ(middle(preset("ac1d_case1")), (std::pair<Index, Index>(13, 15)));
    EXPECT_EQ(middle(preset("ac2d_case1")), (std::pair<Index, Index>(20, 26)));
    EXPECT_EQ(middle(preset("burgers_short")), (std::pair<Index, Index>(20, 20)));
}

TEST(Presets, AllValidAndListed) {
    for (const std::string& name : preset_names()) EXPECT_NO_THROW(validate(preset(name))) << name;
    EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Parse, PresetThenOverrides) {
    const ExperimentConfig c = parse_config(
        "experiment = ac1d_case1\n"
        "# comment line\n"
        "[time]\n"
        "steps = 50   # trailing comment\n"
        "[solver]\n"
        "rank = full\n"
        "method = orthogonal\n"
        "[network]\n"
        "hidden = 8, 6\n");
    EXPECT_EQ(c.experiment, "ac1d_case1");
    EXPECT_EQ(c.steps, 50u);
    EXPECT_EQ(c.epsilon, 0.1);
    EXPECT_FALSE(c.rank.has_value());
    EXPECT_EQ(c.method, LeastSquaresMethod::orthogonal);
    EXPECT_EQ(c.hidden, (std::vector<std::size_t>{8, 6}));
    EXPECT_EQ(parse_config("experiment = heat1d\n[solver]\nrank = 3\n").rank, Index{3});
}

TEST(Parse, Errors) {
    EXPECT_THROW(parse_config("[pde]\nbogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[nowhere]\n"), ConfigError);
    EXPECT_THROW(parse_config("[time]\ndt 1e-3\n"), ConfigError);
    EXPECT_THROW(parse_config("[time]\ndt = fast\n"), ConfigError);
    EXPECT_THROW(parse_config("[time]\ndt = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("[time]\nsteps = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("[solver]\nrank = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("[solver]\nrank = -2\n"), ConfigError);
    EXPECT_THROW(parse_config("[time]\nsteps = 5\nexperiment = heat1d\n"), ConfigError);
    EXPECT_THROW(parse_config("[pde]\nequation = allen_cahn\nepsilon = -1\ninitial = ac1d\n"), ConfigError);
    EXPECT_THROW(parse_config("experiment = pme_drift\n[solver]\nrank = 20\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.txt"), ConfigError);
    try {
        parse_config("[time]\n\nsteps = x\n", "cfg.txt");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cfg.txt:3"), std::string::npos) << e.what();
    }
}

TEST(Parse, EchoRoundTrip) {
    for (const std::string& name : preset_names()) {
        ExperimentConfig c = preset(name);
        c.lambda = 1.0 / 3.0;
        c.dt *= 1.1;
        const ExperimentConfig back = parse_config(to_text(c));
        EXPECT_EQ(to_text(back), to_text(c)) << name;
        EXPECT_EQ(back.dt, c.dt);
        EXPECT_EQ(back.lambda, c.lambda);
        EXPECT_EQ(back.experiment, c.experiment);
    }
}

TEST(Parse, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "lrednn_test_config.txt";
    {
        std::ofstream f(path);
        f << "experiment = burgers_short\n[output]\ndir = somewhere\n";
    }
    const ExperimentConfig c = load_config(path.string());
    EXPECT_EQ(c.output_dir, "somewhere");
    EXPECT_EQ(c.viscosity, 0.05);
    std::filesystem::remove(path);
}

TEST(Scale, HalvesGridAndSteps) {
    ExperimentConfig c = preset("ac2d_case1");
    apply_scale(c, 0.5);
    EXPECT_EQ(c.points, 51u);
    EXPECT_EQ(c.steps, 1000u);
    EXPECT_EQ(c.scale, 0.5);
    ExperimentConfig b = preset("burgers_short");
    apply_scale(b, 0.5);
    EXPECT_EQ(b.points, 32u);
    EXPECT_EQ(b.steps, 150u);
    EXPECT_THROW(apply_scale(b, 0.0), ConfigError);
}
