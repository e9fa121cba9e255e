#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <opinionlab/dynamics.hpp>

using namespace opinionlab;

namespace {

std::vector<double> random_state(std::mt19937_64& eng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(n);
    for (double& v : x) v = u(eng);
    return x;
}

} // namespace

TEST(Rhs, TwoAgentExample) {
    const auto d = rhs(make_state({0.5, -0.5}), TwoAgent{}, PlatformFunction::sgn_eps(0.05), {1.0, 0.4});
    // a(y-x) + b(f(x)-x) = -1 + 0.2
    EXPECT_NEAR(d[0], -0.8, 1e-15);
    EXPECT_NEAR(d[1], 0.8, 1e-15);
}

TEST(Rhs, CompleteUsesNeighborMean) {
    const auto d = rhs(make_state({1.0, 0.0, -1.0}), Complete{3}, PlatformFunction::linear(0.5), {2.0, 1.0});
    EXPECT_NEAR(d[0], 2.0 * (-0.5 - 1.0) + (0.5 - 1.0), 1e-15);
    EXPECT_NEAR(d[1], 0.0, 1e-15);
    EXPECT_NEAR(d[2], -d[0], 1e-15);
}

TEST(Rhs, GraphUsesNeighborhoodMean) {
    const auto g = Graph::from_adjacency({{0, 1, 1}, {1, 0, 0}, {1, 0, 0}});
    const auto d = rhs(make_state({0.0, 1.0, 0.5}), g, PlatformFunction::linear(0.5), {1.0, 1.0});
    EXPECT_NEAR(d[0], 0.75, 1e-15);
    EXPECT_NEAR(d[1], -1.0 + (0.5 - 1.0), 1e-15);
}

TEST(Rhs, DimensionMismatch) {
    try {
        rhs(make_state({0.1, 0.2, 0.3}), TwoAgent{}, PlatformFunction::linear(0.5), {1.0, 1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::dimension_mismatch);
    }
}

TEST(Rhs, PeerTermsCancelInSum) {
    std::mt19937_64 eng(3);
    const auto f = PlatformFunction::sgn_eps(0.1);
    const SystemParams p{1.3, 0.7};
    for (std::size_t n : {2u, 5u, 11u}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto x = random_state(eng, n);
            const Topology topo = n == 2 ? Topology{TwoAgent{}} : Topology{Complete{n}};
            const auto d = rhs(make_state(x), topo, f, p);
            double lhs = 0.0, expect = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                lhs += d[i];
                expect += p.b * (f(x[i]) - x[i]);
            }
            ASSERT_NEAR(lhs, expect, 1e-12);
        }
    }
}

TEST(Integrate, SignFlowsToPersistentDisagreement) {
    const auto traj = integrate(make_state({0.5, -0.5}), TwoAgent{}, PlatformFunction::sgn_eps(1e-3), {1.0, 0.4});
    ASSERT_TRUE(traj.converged);
    const auto& x = traj.final_sample().x;
    EXPECT_NEAR(x[0], 1.0 / 6.0, 1e-7);
    EXPECT_NEAR(x[1], -1.0 / 6.0, 1e-7);
}

TEST(Integrate, AntiSignFlowsToOrigin) {
    const auto traj =
        integrate(make_state({0.7, -0.3}), TwoAgent{}, PlatformFunction::anti_sgn_eps(0.05), {1.0, 1.0});
    ASSERT_TRUE(traj.converged);
    for (double v : traj.final_sample().x) EXPECT_NEAR(v, 0.0, 1e-8);
}

TEST(Integrate, MatchesExactLinearSolution) {
    const double a = 1.0, b = 0.5, alpha = 0.6;
    IntegratorConfig cfg;
    cfg.output_interval = 0.05;
    cfg.max_time = 10.0;
    cfg.stop_on_convergence = false;
    const auto traj = integrate(make_state({0.9, -0.2}), TwoAgent{}, PlatformFunction::linear(alpha), {a, b}, cfg);
    ASSERT_GE(traj.samples.size(), 200u);
    const double s0 = 0.7, d0 = 1.1;
    const double rs = b * (alpha - 1.0), rd = -2.0 * a + b * (alpha - 1.0);
    for (const auto& smp : traj.samples) {
        const double s = s0 * std::exp(rs * smp.t), d = d0 * std::exp(rd * smp.t);
        ASSERT_NEAR(smp.x[0], 0.5 * (s + d), 1e-8) << smp.t;
        ASSERT_NEAR(smp.x[1], 0.5 * (s - d), 1e-8) << smp.t;
    }
}

TEST(Integrate, CentralDifferencesMatchRhs) {
    const Topology topo = Complete{5};
    const auto f = PlatformFunction::sgn_eps(0.2);
    const SystemParams p{1.0, 0.4};
    IntegratorConfig cfg;
    cfg.output_interval = 1e-3;
    cfg.max_time = 1.0;
    cfg.stop_on_convergence = false;
    const auto traj = integrate(make_state({0.9, 0.3, 0.05, -0.4, -0.8}), topo, f, p, cfg);
    ASSERT_GE(traj.samples.size(), 1000u);
    const double h = cfg.output_interval;
    int checked = 0;
    for (std::size_t k = 5; k + 1 < traj.samples.size() && checked < 100; k += 9, ++checked) {
        const auto d = rhs(make_state(traj.samples[k].x), topo, f, p);
        for (std::size_t i = 0; i < 5; ++i) {
            const double fd = (traj.samples[k + 1].x[i] - traj.samples[k - 1].x[i]) / (2.0 * h);
            ASSERT_NEAR(fd, d[i], 1e-4) << "t=" << traj.samples[k].t;
        }
    }
    EXPECT_EQ(checked, 100);
}

TEST(Integrate, StaysInCube) {
    std::mt19937_64 eng(9);
    const auto f = PlatformFunction::sgn_eps(0.05);
    for (int trial = 0; trial < 10; ++trial) {
        const auto traj = integrate(make_state(random_state(eng, 6)), Complete{6}, f, {0.8, 1.2});
        EXPECT_LE(traj.max_excursion, 1e-11);
        for (const auto& s : traj.samples)
            for (double v : s.x) ASSERT_LE(std::abs(v), 1.0);
    }
}

TEST(Integrate, RejectsBadConfig) {
    IntegratorConfig cfg;
    cfg.rel_tol = 0.0;
    EXPECT_THROW(integrate(make_state({0.1, 0.2}), TwoAgent{}, PlatformFunction::linear(0.5), {1, 1}, cfg), Error);
    IntegratorConfig cfg2;
    cfg2.max_time = -1.0;
    EXPECT_THROW(integrate(make_state({0.1, 0.2}), TwoAgent{}, PlatformFunction::linear(0.5), {1, 1}, cfg2), Error);
}

TEST(Integrate, DefaultHorizon) { EXPECT_DOUBLE_EQ(default_max_time({2.0, 0.5}), 400.0); }

TEST(VectorField, Examples) {
    const auto f = PlatformFunction::sgn_eps(0.05);
    const auto grid = vector_field_grid(f, {1.0, 1.0}, 3);
    ASSERT_EQ(grid.size(), 9u);
    // x1-major: index 2 is (-1, 1), index 6 is (1, -1), index 8 is (1, 1)
    EXPECT_EQ(grid[6].x1, 1.0);
    EXPECT_EQ(grid[6].x2, -1.0);
    EXPECT_NEAR(grid[6].dx1, -2.0, 1e-15);
    EXPECT_NEAR(grid[6].dx2, 2.0, 1e-15);
    EXPECT_EQ(grid[8].dx1, 0.0);
    EXPECT_EQ(grid[8].dx2, 0.0);
    const auto lin = vector_field_grid(PlatformFunction::linear(0.5), {1.0, 1.0}, 3);
    EXPECT_EQ(lin[4].x1, 0.0);
    EXPECT_EQ(lin[4].dx1, 0.0);
    EXPECT_EQ(lin[4].dx2, 0.0);
}

TEST(VectorField, ResolutionTooSmall) {
    EXPECT_THROW(vector_field_grid(PlatformFunction::linear(0.5), {1.0, 1.0}, 1), Error);
}
