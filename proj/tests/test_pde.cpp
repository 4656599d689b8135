#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "lrednn/pde.hpp"
#include "test_util.hpp"

using namespace lrednn;
using std::numbers::pi;

namespace {

SpatialJet scalar_jet(std::size_t d, double u, std::vector<double> grad, std::vector<double> second) {
    SpatialJet j;
    j.value = Vector::Constant(1, u);
    j.gradient.resize(1, static_cast<Index>(d));
    j.second.resize(1, static_cast<Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
        j.gradient(0, static_cast<Index>(k)) = grad[k];
        j.second(0, static_cast<Index>(k)) = second[k];
    }
    return j;
}

using Field2 = std::function<double(double, double)>;

// Jet of a scalar field by central differences (h = 1e-4 for seconds).
SpatialJet fd_jet(const std::vector<Field2>& f, double x, double y) {
    const double h1 = 1e-6, h2 = 1e-4;
    const Index q = static_cast<Index>(f.size());
    SpatialJet j{Vector(q), DenseMatrix(q, 2), DenseMatrix(q, 2)};
    for (Index c = 0; c < q; ++c) {
        const auto& g = f[static_cast<std::size_t>(c)];
        j.value[c] = g(x, y);
        j.gradient(c, 0) = (g(x + h1, y) - g(x - h1, y)) / (2 * h1);
        j.gradient(c, 1) = (g(x, y + h1) - g(x, y - h1)) / (2 * h1);
        j.second(c, 0) = (g(x + h2, y) - 2 * g(x, y) + g(x - h2, y)) / (h2 * h2);
        j.second(c, 1) = (g(x, y + h2) - 2 * g(x, y) + g(x, y - h2)) / (h2 * h2);
    }
    return j;
}

}  // namespace

TEST(AllenCahn, WellBottomIsEquilibrium) {
    const auto op = PdeOperator::allen_cahn(1, 0.1);
    EXPECT_EQ(op.evaluate(Vector::Constant(1, 0.3), scalar_jet(1, 1.0, {0.0}, {0.0}))[0], 0.0);
    EXPECT_EQ(op.evaluate(Vector::Constant(1, 0.3), scalar_jet(1, -1.0, {0.0}, {0.0}))[0], 0.0);
}

TEST(AllenCahn, LinearizationAtZero) {
    const auto op = PdeOperator::allen_cahn(2, 0.1);
    Vector x(2);
    x << 0.1, 0.2;
    EXPECT_NEAR(op.evaluate(x, scalar_jet(2, 0.0, {0.4, -0.2}, {1.5, 0.5}))[0], 0.01 * 2.0, 1e-16);
}

TEST(AllenCahn, RejectsBadParameters) {
    EXPECT_THROW(PdeOperator::allen_cahn(3, 0.1), ConfigError);
    EXPECT_THROW(PdeOperator::allen_cahn(1, 0.0), ConfigError);
    EXPECT_THROW(PdeOperator::burgers(-1.0), ConfigError);
    EXPECT_THROW(PdeOperator::heat1d(0.0), ConfigError);
}

TEST(Operators, RejectShapeMismatch) {
    const auto op = PdeOperator::burgers(0.05);
    Vector x(2);
    x << 0, 0;
    EXPECT_THROW(op.evaluate(x, scalar_jet(2, 0.0, {0, 0}, {0, 0})), ContractViolation);
    EXPECT_THROW(PdeOperator::heat1d(1.0).evaluate(x, scalar_jet(2, 0.0, {0, 0}, {0, 0})), ContractViolation);
}

TEST(PmeDrift, MatchesSymbolicOracleOnManufacturedField) {
    // u = sin(pi x) sin(pi y); div(grad u^2) and div(V u) differentiated by hand
    // in their unexpanded form.
    const auto op = PdeOperator::pme_drift();
    for (int i = 0; i < 5; ++i) {
        for (int k = 0; k < 5; ++k) {
            const double x = -0.9 + 0.41 * i, y = -0.8 + 0.37 * k;
            const double sx = std::sin(pi * x), cx = std::cos(pi * x);
            const double sy = std::sin(pi * y), cy = std::cos(pi * y);
            const double u = sx * sy;
            const double lap_u2 = 2 * pi * pi * ((cx * cx - sx * sx) * sy * sy + (cy * cy - sy * sy) * sx * sx);
            const double div_vu = pi * cx * sy - 2 * pi * sx * cx * sy * sy + pi * sx * cy -
                                  2 * pi * sx * sx * sy * cy;
            const double expected = lap_u2 - div_vu;
            Vector p(2);
            p << x, y;
            const SpatialJet jet = scalar_jet(2, u, {pi * cx * sy, pi * sx * cy},
                                              {-pi * pi * u, -pi * pi * u});
            EXPECT_NEAR(op.evaluate(p, jet)[0], expected, 1e-10);
        }
    }
}

TEST(PmeDrift, DriftDivergenceMatchesFiniteDifferences) {
    for (double x : {-0.7, 0.1, 0.55})
        for (double y : {-0.3, 0.25, 0.9}) {
            const double h = 1e-6;
            const double fd = (PdeOperator::drift(x + h, y) - PdeOperator::drift(x - h, y)) / (2 * h) +
                              (PdeOperator::drift(x, y + h) - PdeOperator::drift(x, y - h)) / (2 * h);
            EXPECT_NEAR(PdeOperator::drift_divergence(x, y), fd, 1e-8);
        }
}

TEST(Operators, MatchFiniteDifferenceRightHandSides) {
    // Manufactured smooth fields; the oracle differentiates the defining
    // (conservative) form of each right-hand side numerically.
    const Field2 f = [](double x, double y) { return 0.6 + 0.3 * std::sin(pi * x + 0.4) * std::cos(pi * y - 0.2); };
    const Field2 g = [](double x, double y) { return 0.2 * std::cos(2 * pi * x) - 0.5 * std::sin(pi * y + 1.0); };
    const double h = 1e-3;
    for (double x : {-0.6, 0.05, 0.7})
        for (double y : {-0.45, 0.3, 0.85}) {
            Vector p(2);
            p << x, y;
            // PME: d/dx(d/dx u^2) + d/dy(d/dy u^2) - d/dx(V u) - d/dy(V u).
            const Field2 u2 = [&](double a, double b) { return f(a, b) * f(a, b); };
            const Field2 vu = [&](double a, double b) { return PdeOperator::drift(a, b) * f(a, b); };
            const double lap_u2 = (u2(x + h, y) + u2(x - h, y) + u2(x, y + h) + u2(x, y - h) - 4 * u2(x, y)) / (h * h);
            const double div_vu = (vu(x + h, y) - vu(x - h, y) + vu(x, y + h) - vu(x, y - h)) / (2 * h);
            const double pme = PdeOperator::pme_drift().evaluate(p, fd_jet({f}, x, y))[0];
            EXPECT_NEAR(pme, lap_u2 - div_vu, 1e-4 * std::max(1.0, std::abs(pme)));

            const auto ac = PdeOperator::allen_cahn(2, 0.3);
            const double lap_f = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / (h * h);
            const double u = f(x, y);
            EXPECT_NEAR(ac.evaluate(p, fd_jet({f}, x, y))[0], 0.09 * lap_f - u * (u * u - 1) / 0.09, 1e-4);

            const auto bu = PdeOperator::burgers(0.05);
            const Vector n = bu.evaluate(p, fd_jet({f, g}, x, y));
            const double fx = (f(x + h, y) - f(x - h, y)) / (2 * h), fy = (f(x, y + h) - f(x, y - h)) / (2 * h);
            const double gx = (g(x + h, y) - g(x - h, y)) / (2 * h), gy = (g(x, y + h) - g(x, y - h)) / (2 * h);
            const double lap_g = (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4 * g(x, y)) / (h * h);
            const double uu = f(x, y), vv = g(x, y);
            EXPECT_NEAR(n[0], 0.05 * lap_f - (uu * fx + vv * fy), 1e-5);
            EXPECT_NEAR(n[1], 0.05 * lap_g - (uu * gx + vv * gy), 1e-5);
        }
}

TEST(Energy, AllenCahnPurePhaseIsZero) {
    const auto grid = CollocationGrid::periodic_box(1, 64);
    const auto op = PdeOperator::allen_cahn(1, 0.1);
    std::vector<DenseMatrix> grads(grid.size(), DenseMatrix::Zero(1, 1));
    EXPECT_EQ(op.energy(grid, DenseMatrix::Ones(64, 1), grads), 0.0);
    EXPECT_EQ(op.energy(grid, -DenseMatrix::Ones(64, 1), grads), 0.0);
}

TEST(Energy, AllenCahnZeroFieldIsPotentialTimesArea) {
    const auto grid = CollocationGrid::periodic_box(1, 64);
    std::vector<DenseMatrix> grads(grid.size(), DenseMatrix::Zero(1, 1));
    EXPECT_NEAR(PdeOperator::allen_cahn(1, 0.1).energy(grid, DenseMatrix::Zero(64, 1), grads), 50.0, 1e-12);
}

TEST(Energy, AllenCahnIsMinimalAtPurePhases) {
    const auto grid = CollocationGrid::periodic_box(1, 32);
    const auto op = PdeOperator::allen_cahn(1, 0.1);
    std::vector<DenseMatrix> zero(grid.size(), DenseMatrix::Zero(1, 1));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Vector delta = 1e-3 * lrednn::testing::random_vector(32, seed).cwiseMax(-1.0).cwiseMin(1.0);
        std::vector<DenseMatrix> grads(grid.size(), DenseMatrix::Zero(1, 1));
        for (std::size_t i = 0; i < grid.size(); ++i)
            grads[i](0, 0) = (delta[static_cast<Index>((i + 1) % 32)] - delta[static_cast<Index>(i)]) / grid.spacing(0);
        for (double phase : {1.0, -1.0}) {
            const DenseMatrix u = DenseMatrix::Constant(32, 1, phase) + delta;
            EXPECT_GE(op.energy(grid, u, grads), op.energy(grid, DenseMatrix::Constant(32, 1, phase), zero));
        }
    }
}

TEST(Energy, BurgersInitialKineticEnergyIsOne) {
    const auto grid = CollocationGrid::periodic_box(2, 32);
    const DenseMatrix uv = sample_field(initial_condition("burgers"), grid, 2);
    std::vector<DenseMatrix> grads(grid.size(), DenseMatrix::Zero(2, 2));
    EXPECT_NEAR(PdeOperator::burgers(0.05).energy(grid, uv, grads), 1.0, 1e-12);
}

TEST(Energy, QuadratureConvergesUnderRefinement) {
    const auto op = PdeOperator::allen_cahn(2, 0.2);
    auto energy_at = [&](std::size_t n) {
        const auto grid = CollocationGrid::periodic_box(2, n);
        DenseMatrix u(static_cast<Index>(grid.size()), 1);
        std::vector<DenseMatrix> grads;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid.points()(static_cast<Index>(i), 0), y = grid.points()(static_cast<Index>(i), 1);
            u(static_cast<Index>(i), 0) = 0.5 * std::tanh(std::sin(pi * x) + 0.5 * std::cos(pi * y));
            DenseMatrix g(1, 2);
            const double s = 1.0 - std::pow(std::tanh(std::sin(pi * x) + 0.5 * std::cos(pi * y)), 2);
            g << 0.5 * s * pi * std::cos(pi * x), -0.25 * s * pi * std::sin(pi * y);
            grads.push_back(g);
        }
        return op.energy(grid, u, grads);
    };
    const double e8 = energy_at(8), e16 = energy_at(16), e32 = energy_at(32);
    const double h8 = 2.0 / 8, h16 = 2.0 / 16;
    EXPECT_LE(std::abs(e16 - e8), 10.0 * h8 * h8 * std::abs(e8));
    EXPECT_LE(std::abs(e32 - e16), 10.0 * h16 * h16 * std::abs(e16));
    EXPECT_LE(std::abs(e32 - e16), std::abs(e16 - e8) + 1e-12);
}

TEST(ExactHeat, ClosedForm) {
    EXPECT_NEAR(exact_heat_1d(0.3, 0.0, 1.0), std::sin(pi * 0.3), 1e-15);
    EXPECT_EQ(exact_heat_1d(0.0, 0.7, 1.0), 0.0);
    EXPECT_NEAR(exact_heat_1d(0.5, 0.1, 1.0), std::exp(-pi * pi * 0.1), 1e-15);
    EXPECT_NEAR(exact_heat_1d(0.5, 0.1, 1.0), 0.372708, 1e-6);
    EXPECT_THROW(exact_heat_1d(0.5, -1.0, 1.0), ContractViolation);
}

TEST(InitialCondition, ClosedFormValues) {
    Vector x1 = Vector::Zero(1);
    EXPECT_NEAR(initial_condition("ac1d")(x1)[0], 0.0, 1e-17);
    x1[0] = 0.5;
    EXPECT_NEAR(initial_condition("ac1d")(x1)[0], 0.08, 1e-16);
    Vector x2(2);
    x2 << 0.5, 0.5;
    EXPECT_NEAR(initial_condition("ac2d")(x2)[0], 0.15, 1e-16);
    x2 << -1.0, -1.0;
    const Vector uv = initial_condition("burgers")(x2);
    EXPECT_EQ(uv[1], 0.0);
    EXPECT_EQ(std::abs(uv[0]), 0.0);
    EXPECT_THROW(initial_condition("navier_stokes"), ConfigError);
    EXPECT_THROW(initial_condition("pme_drift"), ConfigError);
}
