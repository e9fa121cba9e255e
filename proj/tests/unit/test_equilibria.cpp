#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <opinionlab/equilibria.hpp>

using namespace opinionlab;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an opinionlab::Error";
    return Errc::invalid_argument;
}

PlatformFunction near_boundary() {
    return PlatformFunction::piecewise({{-1, -1},
                                        {-0.3, -0.15},
                                        {-0.25, -0.5 + 1e-6},
                                        {-0.2, -0.1},
                                        {0, 0},
                                        {0.2, 0.1},
                                        {0.25, 0.5 - 1e-6},
                                        {0.3, 0.15},
                                        {1, 1}});
}

double max_diff(const std::vector<double>& u, const std::vector<double>& v) {
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) d = std::max(d, std::abs(u[i] - v[i]));
    return d;
}

} // namespace

TEST(Planes, TwoAgentExamples) {
    const SystemParams p{1.0, 1.0};
    EXPECT_DOUBLE_EQ(plane_g_two_agent(0.5, 0.0, p), 1.0);
    EXPECT_DOUBLE_EQ(plane_h_two_agent(0.5, 0.5, p), 0.5);
    EXPECT_DOUBLE_EQ(plane_g_two_agent(0.0, 0.0, p), 0.0);
    EXPECT_DOUBLE_EQ(plane_g_two_agent(0.5, -0.25, {1.0, 1.0}), 1.25);
    EXPECT_DOUBLE_EQ(plane_g_two_agent(0.5, 0.0, {2.0, 1.0}), 1.5);
}

TEST(Planes, CompleteExamples) {
    const SystemParams p{1.0, 1.0};
    EXPECT_DOUBLE_EQ(plane_g_complete(0.5, 0.0, p), 1.0);
    EXPECT_DOUBLE_EQ(plane_g_complete(0.0, 0.0, p), 0.0);
    EXPECT_NEAR(plane_g_complete(0.5, -0.1, p), 1.1, 1e-15);
}

TEST(Planes, ReflectionIdentity) {
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.1, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const SystemParams p{pos(eng), pos(eng)};
        const double x = u(eng), y = u(eng);
        ASSERT_NEAR(plane_h_two_agent(x, y, p), plane_g_two_agent(y, x, p), 1e-14);
        ASSERT_NEAR(plane_g_two_agent(-x, -y, p), -plane_g_two_agent(x, y, p), 1e-14);
    }
}

TEST(Planes, RhsIsBTimesGap) {
    std::mt19937_64 eng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto f = PlatformFunction::sgn_eps(0.1);
    const SystemParams p{1.5, 0.5};
    for (int i = 0; i < 500; ++i) {
        const double x = u(eng), y = u(eng);
        const auto d = rhs(make_state({x, y}), TwoAgent{}, f, p);
        ASSERT_NEAR(d[0], p.b * (f(x) - plane_g_two_agent(x, y, p)), 1e-13);
        ASSERT_NEAR(d[1], p.b * (f(y) - plane_h_two_agent(x, y, p)), 1e-13);
    }
}

TEST(Classify, Examples) {
    const auto f = PlatformFunction::sgn_eps(1e-3);
    const SystemParams p{1.0, 0.4};
    EXPECT_EQ(classify_state(make_state({1.0, 1.0}), TwoAgent{}, f, p).classification,
              Classification::StrongConsensus);
    EXPECT_EQ(classify_state(make_state({0.0, 0.0}), TwoAgent{}, f, p).classification,
              Classification::StrongConsensus);
    EXPECT_EQ(classify_state(make_state({1.0 / 6.0, -1.0 / 6.0}), TwoAgent{}, f, p).classification,
              Classification::PersistentDisagreement);
    EXPECT_EQ(classify_state(make_state({0.5, -0.5}), TwoAgent{}, f, p).classification,
              Classification::NotEquilibrium);
    Tolerances loose;
    loose.eq_tol = 10.0;
    EXPECT_EQ(classify_state(make_state({0.5, 0.4}), TwoAgent{}, f, p, loose).classification,
              Classification::Consensus);
    EXPECT_STREQ(to_string(Classification::PersistentDisagreement), "persistent_disagreement");
}

TEST(Classify, StrongConsensusCondition) {
    const auto sgn = PlatformFunction::sgn_eps(0.05);
    EXPECT_TRUE(strong_consensus_condition(sgn, 1.0));
    EXPECT_TRUE(strong_consensus_condition(sgn, -1.0));
    EXPECT_TRUE(strong_consensus_condition(sgn, 0.0));
    EXPECT_FALSE(strong_consensus_condition(sgn, 0.5));
    const auto lin = PlatformFunction::linear(0.9);
    EXPECT_TRUE(strong_consensus_condition(lin, 0.0));
    EXPECT_FALSE(strong_consensus_condition(lin, 0.5));
}

TEST(Classify, UniformFixedPointsAreEquilibriaEverywhere) {
    const auto f = PlatformFunction::sgn_eps(0.05);
    const auto g = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    for (double y : {-1.0, 0.0, 1.0}) {
        EXPECT_EQ(classify_state(make_state(std::vector<double>(4, y)), g, f, {1, 1}).classification,
                  Classification::StrongConsensus);
        EXPECT_EQ(classify_state(make_state(std::vector<double>(5, y)), Complete{5}, f, {1, 1}).classification,
                  Classification::StrongConsensus);
    }
    EXPECT_EQ(classify_state(make_state(std::vector<double>(4, 0.5)), g, f, {1, 1}).classification,
              Classification::NotEquilibrium);
}

TEST(Witness, SignHasOne) {
    const auto f = PlatformFunction::sgn_eps(1e-3);
    const SystemParams p{1.0, 0.4};
    const auto w = pd_sufficient_witness(f, p, 64);
    ASSERT_TRUE(w);
    EXPECT_TRUE(satisfies_pd_condition(f, p, w->z, w->y));
    EXPECT_TRUE(satisfies_pd_condition(f, p, w->grid_z, w->grid_y));
    EXPECT_GT(w->z, 0.0);
    EXPECT_LT(w->y, 0.0);
}

TEST(Witness, HarmonizingFunctionsHaveNone) {
    EXPECT_FALSE(pd_sufficient_witness(PlatformFunction::linear(0.9), {1.0, 1.0}, 64));
    EXPECT_FALSE(pd_sufficient_witness(PlatformFunction::anti_sgn_eps(0.05), {1.0, 1.0}, 64));
}

TEST(Witness, GridTooCoarse) {
    EXPECT_EQ(code_of([] { pd_sufficient_witness(PlatformFunction::linear(0.9), {1, 1}, 4); }),
              Errc::invalid_argument);
}

TEST(Certificate, Verdicts) {
    const auto sgn = harmonizing_certificate(PlatformFunction::sgn_eps(1e-3), {1.0, 0.4}, 64);
    EXPECT_EQ(sgn.verdict, Verdict::Polarizing);
    EXPECT_TRUE(sgn.witness);
    const auto lin = harmonizing_certificate(PlatformFunction::linear(0.9), {1.0, 1.0}, 64);
    EXPECT_EQ(lin.verdict, Verdict::Harmonizing);
    EXPECT_GT(lin.certified_margin, 0.0);
    EXPECT_FALSE(lin.witness);
    const auto anti = harmonizing_certificate(PlatformFunction::anti_sgn_eps(1e-3), {1.0, 1.0}, 64);
    EXPECT_EQ(anti.verdict, Verdict::Harmonizing);
    EXPECT_EQ(anti.unresolved_cells, 0u);
}

TEST(Certificate, NearBoundaryNeedsRefinement) {
    const auto f = near_boundary();
    CertificateOptions shallow;
    shallow.max_depth = 4;
    const auto coarse = harmonizing_certificate(f, {1.0, 1.0}, 64, shallow);
    EXPECT_EQ(coarse.verdict, Verdict::Inconclusive);
    EXPECT_GT(coarse.unresolved_cells, 0u);
    EXPECT_EQ(coarse.suggested_resolution, 256);
    const auto fine = harmonizing_certificate(f, {1.0, 1.0}, 64);
    EXPECT_EQ(fine.verdict, Verdict::Harmonizing);
    EXPECT_GT(fine.certified_margin, 0.0);
}

TEST(Certificate, SoundAgainstOracle) {
    // Harmonizing verdicts must never coexist with an oracle PD equilibrium,
    // and witnesses must satisfy the sufficient condition.
    std::mt19937_64 eng(21);
    std::uniform_real_distribution<double> u(0.3, 2.0);
    std::vector<PlatformFunction> fs = {PlatformFunction::sgn_eps(0.05), PlatformFunction::sgn_eps(0.3),
                                        PlatformFunction::anti_sgn_eps(0.05), PlatformFunction::linear(0.7),
                                        near_boundary()};
    for (int trial = 0; trial < 10; ++trial) {
        const SystemParams p{u(eng), u(eng)};
        for (const auto& f : fs) {
            const auto cert = harmonizing_certificate(f, p, 32);
            if (cert.witness) {
                EXPECT_TRUE(satisfies_pd_condition(f, p, cert.witness->z, cert.witness->y));
            }
            if (cert.verdict != Verdict::Harmonizing) continue;
            std::vector<OracleEquilibrium> eqs;
            try {
                eqs = oracle_equilibria(TwoAgent{}, f, p, 1'000'000);
            } catch (const Error& e) {
                ASSERT_EQ(e.code(), Errc::degenerate_equilibria);
                continue;
            }
            for (const auto& e : eqs)
                EXPECT_NE(e.report.classification, Classification::PersistentDisagreement)
                    << kind_name(f) << " a=" << p.a << " b=" << p.b;
        }
    }
}

TEST(Enumerate, TwoAgentSign) {
    const auto states = enumerate_sign_two_agent({1.0, 0.4});
    ASSERT_EQ(states.size(), 5u);
    EXPECT_NEAR(states[3].x[0], 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(states[4].x[0], -1.0 / 6.0, 1e-15);
}

TEST(Enumerate, CompleteFamilies) {
    const auto states = enumerate_sign_complete(3, {1.0, 1.0});
    // 3 uniform, 2 two-value, 1 three-value
    ASSERT_EQ(states.size(), 6u);
    const auto& tv = states[3];
    EXPECT_EQ(tv.family, Family::TwoValue);
    EXPECT_EQ(tv.k, 1);
    EXPECT_NEAR(tv.x[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(tv.x[2], -2.0 / 3.0, 1e-15);
    const auto& three = states[5];
    EXPECT_EQ(three.family, Family::ThreeValue);
    EXPECT_NEAR(three.x[0], 0.5, 1e-15);
    EXPECT_EQ(three.x[1], 0.0);
    EXPECT_NEAR(three.x[2], -0.5, 1e-15);
}

TEST(Enumerate, CompleteTwoAgentsTwoValue) {
    const SystemParams p{1.3, 0.6};
    const auto states = enumerate_sign_complete(2, p);
    ASSERT_EQ(states.size(), 4u);
    EXPECT_NEAR(states[3].x[0], p.b / (p.a + p.b), 1e-15);
}

TEST(Oracle, TwoAgentSignMatchesClosedForm) {
    std::mt19937_64 eng(17);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (double eps : {1e-2, 1e-3}) {
        for (int trial = 0; trial < 20; ++trial) {
            const SystemParams p{u(eng), u(eng)};
            const auto all = oracle_equilibria(TwoAgent{}, PlatformFunction::sgn_eps(eps), p, 1000);
            const auto eqs = epsilon_independent(all);
            const auto closed = enumerate_sign_two_agent(p);
            ASSERT_EQ(eqs.size(), closed.size());
            EXPECT_EQ(all.size(), 9u);
            for (const auto& c : closed) {
                const bool hit = std::any_of(eqs.begin(), eqs.end(), [&](const OracleEquilibrium& e) {
                    return max_diff(e.report.state.x, c.x) <= 1e-8;
                });
                EXPECT_TRUE(hit) << "eps=" << eps << " a=" << p.a << " b=" << p.b << " x0=" << c.x[0];
            }
        }
    }
}

TEST(Oracle, SortedDescending) {
    const auto eqs = oracle_equilibria(Complete{3}, PlatformFunction::sgn_eps(0.01), {1.0, 1.0}, 1000);
    for (std::size_t i = 1; i < eqs.size(); ++i)
        EXPECT_TRUE(eqs[i - 1].report.state.x >= eqs[i].report.state.x);
    EXPECT_LE(max_diff(eqs.front().report.state.x, std::vector<double>(3, 1.0)), 1e-12);
}

TEST(Oracle, LinearHasOnlyOrigin) {
    const auto eqs = oracle_equilibria(Complete{5}, PlatformFunction::linear(0.9), {1.0, 1.0}, 1000);
    ASSERT_EQ(eqs.size(), 1u);
    EXPECT_EQ(eqs[0].report.classification, Classification::StrongConsensus);
}

TEST(Oracle, PdStatesLieOnPlanes) {
    const SystemParams p{0.8, 0.6};
    const auto f = PlatformFunction::sgn_eps(0.02);
    for (const auto& e : oracle_equilibria(TwoAgent{}, f, p, 1000)) {
        const double x = e.report.state.x[0], y = e.report.state.x[1];
        EXPECT_NEAR(f(x), plane_g_two_agent(x, y, p), 1e-9 * (1 + p.a / p.b));
        EXPECT_NEAR(f(y), plane_h_two_agent(x, y, p), 1e-9 * (1 + p.a / p.b));
    }
    const Complete k4{4};
    for (const auto& e : oracle_equilibria(k4, f, p, 1000)) {
        if (e.report.classification != Classification::PersistentDisagreement) continue;
        const auto chk = pd_necessary_check_complete(e.report.state, k4, f, p);
        EXPECT_TRUE(chk.holds);
        EXPECT_TRUE(chk.strictly_mixed);
    }
}

TEST(Oracle, Budget) {
    const auto f = PlatformFunction::sgn_eps(0.05);
    EXPECT_EQ(code_of([&] { oracle_equilibria(Complete{9}, f, {1, 1}, 1'000'000'000); }), Errc::budget_exceeded);
    EXPECT_EQ(code_of([&] { oracle_equilibria(Complete{4}, f, {1, 1}, 10); }), Errc::budget_exceeded);
}

TEST(Oracle, DegenerateParameters) {
    // b(1/eps - 1) = 1 = 2a puts a line of equilibria inside the band
    EXPECT_EQ(code_of([] { oracle_equilibria(TwoAgent{}, PlatformFunction::sgn_eps(0.5), {0.5, 1.0}, 1000); }),
              Errc::degenerate_equilibria);
    EXPECT_EQ(code_of([] {
                  oracle_equilibria(TwoAgent{}, PlatformFunction::piecewise({{-1, -1}, {1, 1}}), {1.0, 1.0}, 1000);
              }),
              Errc::degenerate_equilibria);
}

TEST(NecessaryCheck, TwoAgentExamples) {
    const Complete k2{2};
    const SystemParams p{1.0, 0.4};
    const auto sgn = pd_necessary_check_complete(make_state({1.0 / 6.0, -1.0 / 6.0}), k2,
                                                 PlatformFunction::sgn_eps(1e-3), p);
    EXPECT_TRUE(sgn.holds);
    EXPECT_TRUE(sgn.strictly_mixed);
    const auto lin = pd_necessary_check_complete(make_state({0.5, -0.5}), k2, PlatformFunction::linear(0.9), p);
    EXPECT_FALSE(lin.holds);
    EXPECT_TRUE(lin.strictly_mixed);
    const auto same = pd_necessary_check_complete(make_state({0.5, 0.5}), k2, PlatformFunction::linear(0.9), p);
    EXPECT_FALSE(same.strictly_mixed);
}

TEST(Audit, FamiliesAreAccountedFor) {
    for (int n = 3; n <= 5; ++n) {
        const auto audit = audit_sign_complete(n, {1.0, 1.0}, 1e-3);
        EXPECT_TRUE(audit.unexplained_oracle_states.empty()) << n;
        for (const auto& fam : audit.families) {
            EXPECT_NE(fam.status, "unexplained") << n << " " << to_string(fam.family);
            if (fam.family == Family::Uniform) {
                EXPECT_EQ(fam.status, "agreement");
            }
        }
    }
}
