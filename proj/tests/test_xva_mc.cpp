#include <gtest/gtest.h>

#include <cmath>

#include <xva/xva_mc.hpp>
#include <xva/xva_pde.hpp>

#include "support/oracles.hpp"

using namespace xva;

namespace {

MarketCurves zero_spread() {
    MarketCurves c;
    c.r = 0.02;
    c.q_s = 0.02;
    c.q_c = 0.02;
    c.r_x = 0.02;
    c.gamma_k = 0.02;
    c.r_ib = 0.02;
    c.r_ic = 0.02;
    c.sigma = 0.25;
    c.mu = 0.05;
    c.recovery = {0.0, 0.4, 0.4, 0.4};
    return c;
}

MarketCurves full_market() {
    MarketCurves c = zero_spread();
    c.lambda_b = 0.02;
    c.lambda_c = 0.03;
    c.r_x = 0.025;
    c.gamma_k = 0.10;
    c.r_ib = 0.01;
    c.r_ic = 0.01;
    return c;
}

MarginCapitalSpec full_margins() {
    return {0.5, ProfileRule::proportional(0.1), ProfileRule::proportional(0.1), ProfileRule::proportional(0.2), 0.6};
}

const TradeSpec atm_forward{PayoffKind::forward, 100.0, 1.0, 1};

PathGrid pricing(const MarketCurves& c, std::size_t n, std::uint64_t seed, double T = 1.0, std::size_t steps = 100) {
    return simulate_paths(c, 100.0, uniform_mesh(0.0, T, steps), n, seed, Measure::pricing);
}

} // namespace

TEST(ComputeXva, ZeroSpreadsGiveExactZeros) {
    const auto c = zero_spread();
    const auto paths = pricing(c, 3000, 1);
    for (auto strategy : {HedgeStrategy::single_bond(), HedgeStrategy::zero_hedge_error()}) {
        const auto b = compute_xva(c, {PayoffKind::call, 95.0, 1.0, -1}, full_margins(), strategy, paths);
        for (double v : b.value.as_array())
            EXPECT_EQ(v, 0.0);
        EXPECT_EQ(b.total, 0.0);
        EXPECT_EQ(b.total_std_error, 0.0);
        EXPECT_EQ(b.iterations, 1);
    }
}

TEST(ComputeXva, CvaMatchesEpeOracle) {
    MarketCurves c = zero_spread();
    c.lambda_c = 0.03;
    const MarginCapitalSpec none;
    const auto paths = pricing(c, 40000, 2024);
    const auto b = compute_xva(c, atm_forward, none, HedgeStrategy::single_bond(), paths);
    const double oracle = xva_test::forward_cva({0.02, 0.03, 0.0, 0.4, 0.25, 0.02, 100.0}, 100.0, 1.0);
    EXPECT_NEAR(oracle, -0.13484902868118487, 1e-9);  // independent scipy evaluation
    EXPECT_LT(std::abs(b.value.cva - oracle), 3.0 * b.std_error.cva);
    EXPECT_GT(b.std_error.cva, 0.0);
    EXPECT_EQ(b.value.dva, 0.0);
    EXPECT_EQ(b.value.fca, 0.0);
    EXPECT_EQ(b.value.kva, 0.0);
}

TEST(ComputeXva, ColvaFollowsFromMartingaleIdentity) {
    // With no default risk, E[e^{-ru} V_u] = V_0, so ColVA = -(r_X - r) chi V_0 T.
    MarketCurves c = zero_spread();
    c.r_x = 0.035;
    MarginCapitalSpec m;
    m.vm_fraction = 0.5;
    const TradeSpec fwd{PayoffKind::forward, 90.0, 1.0, 1};
    const auto paths = pricing(c, 20000, 5);
    const auto b = compute_xva(c, fwd, m, HedgeStrategy::single_bond(), paths);
    const double v0 = xva_test::forward_value({0.02, 0.0, 0.0, 0.4, 0.25, 0.02, 100.0}, 90.0, 1.0, 0.0, 100.0);
    const double oracle = -(0.035 - 0.02) * 0.5 * v0 * 1.0;
    EXPECT_LT(std::abs(b.value.colva - oracle), 3.0 * b.std_error.colva + 1e-10);
}

TEST(ComputeXva, KvaLegacyRelationIsBitwise) {
    MarketCurves c = full_market();
    MarginCapitalSpec m = full_margins();
    m.capital = ProfileRule::constant(8.0);
    const auto paths = pricing(c, 2000, 77);
    for (double phi : {0.0, 0.3, 0.6, 1.0}) {
        m.phi = phi;
        const auto corrected = compute_xva(c, atm_forward, m, HedgeStrategy::single_bond(), paths);
        const auto legacy = compute_xva_legacy(c, atm_forward, m, HedgeStrategy::single_bond(), paths);
        EXPECT_EQ(corrected.value.kva, phi * legacy.value.kva) << "phi " << phi;
        EXPECT_LT(legacy.value.kva, 0.0);
        if (phi == 0.0) {
            EXPECT_EQ(corrected.value.kva, 0.0);
        }
    }
}

TEST(ComputeXva, KvaWithConstantCapitalHasClosedForm) {
    MarketCurves c = full_market();
    MarginCapitalSpec m;
    m.capital = ProfileRule::constant(8.0);
    m.phi = 1.0;
    const auto paths = pricing(c, 50, 3);
    const auto legacy = compute_xva_legacy(c, atm_forward, m, HedgeStrategy::single_bond(), paths);
    // -(gamma_K - r - lambda_B) K int_0^1 e^{-0.07u} du with trapezoid error O(h^2)
    const double rate = 0.02 + 0.02 + 0.03;
    const double exact = -(0.10 - 0.02 - 0.02) * 8.0 * (1.0 - std::exp(-rate)) / rate;
    EXPECT_NEAR(legacy.value.kva, exact, 1e-6);
}

TEST(ComputeXva, CorrectedMvaIgnoresReceivedMargin) {
    MarketCurves c = full_market();
    MarginCapitalSpec m = full_margins();
    const auto paths = pricing(c, 2000, 9);
    const auto base = compute_xva(c, atm_forward, m, HedgeStrategy::single_bond(), paths);
    m.ic = ProfileRule::constant(25.0);
    c.r_ic = 0.07;
    const auto changed = compute_xva(c, atm_forward, m, HedgeStrategy::single_bond(), paths);
    EXPECT_EQ(base.value.mva, changed.value.mva);
    EXPECT_EQ(base.std_error.mva, changed.std_error.mva);
}

TEST(ComputeXva, LegacyMvaDeltaMatchesRecomputedIntegral) {
    MarketCurves c = full_market();
    c.r_ic = 0.045;
    MarginCapitalSpec m = full_margins();
    m.ic = ProfileRule::proportional(0.3);
    const std::size_t steps = 50;
    const auto paths = pricing(c, 3000, 13, 1.0, steps);
    const auto corrected = compute_xva(c, atm_forward, m, HedgeStrategy::single_bond(), paths);
    const auto legacy = compute_xva_legacy(c, atm_forward, m, HedgeStrategy::single_bond(), paths);

    // -int D (r_IC - r - lambda_B) E[I_C] du, trapezoid on the path mesh, I_C from the oracle value
    const xva_test::FlatMarket fm{0.02, 0.03, 0.02, 0.4, 0.25, 0.02, 100.0};
    double integral = 0.0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double u = static_cast<double>(k) / steps;
        double e_ic = 0.0;
        for (std::size_t j = 0; j < paths.n_paths(); ++j)
            e_ic += 0.3 * std::abs(xva_test::forward_value(fm, 100.0, 1.0, u, paths(j, k)));
        e_ic /= static_cast<double>(paths.n_paths());
        const double w = (k == 0 || k == steps) ? 0.5 / steps : 1.0 / steps;
        integral += w * std::exp(-0.07 * u) * (0.045 - 0.02 - 0.02) * e_ic;
    }
    const double delta = legacy.value.mva - corrected.value.mva;
    EXPECT_NEAR(delta, -integral, 1e-12 * std::abs(integral));
    EXPECT_LT(delta, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_EQ(legacy.value.as_array()[i], corrected.value.as_array()[i]) << XvaTerms::names[i];
}

TEST(ComputeXva, SingleBondPicardContractsAndMatchesPde) {
    MarketCurves c = full_market();
    const MarginCapitalSpec m = full_margins();
    const auto strategy = HedgeStrategy::single_bond(2);
    McSettings s;
    s.fca_tolerance = 1e-13;
    const auto paths = pricing(c, 30000, 31);
    const auto b = compute_xva(c, atm_forward, m, strategy, paths, s);
    ASSERT_GE(b.iterations, 3);
    // contraction factor is about lambda_B * R_2 * T
    for (std::size_t i = 2; i < b.iteration_trace.size(); ++i) {
        if (b.iteration_trace[i - 1] < 1e-14)
            break;
        const double ratio = b.iteration_trace[i] / b.iteration_trace[i - 1];
        EXPECT_LT(ratio, 0.02);
    }
    PdeGrid g;
    g.space_intervals = 400;
    g.time_steps = 200;
    const double coarse = solve_pde(c, atm_forward, m, strategy, g, 100.0).value;
    const double fine = solve_pde(c, atm_forward, m, strategy, g.refined(), 100.0).value;
    const auto rich = richardson(coarse, fine);
    EXPECT_LE(std::abs(b.total - fine), 3.0 * b.total_std_error + rich.error);
}

TEST(ComputeXva, ZeroHedgeErrorNeedsOneSweep) {
    const auto c = full_market();
    const auto paths = pricing(c, 500, 4);
    const auto b = compute_xva(c, atm_forward, full_margins(), HedgeStrategy::zero_hedge_error(), paths);
    EXPECT_EQ(b.iterations, 1);
    for (double x : b.profile.fca_exposure)
        EXPECT_TRUE(std::isfinite(x));
}

TEST(ComputeXva, DeterministicAcrossThreads) {
    const auto c = full_market();
    const auto paths = pricing(c, 3000, 8);
    McSettings one, many;
    many.threads = 4;
    const auto a = compute_xva(c, atm_forward, full_margins(), HedgeStrategy::single_bond(), paths, one);
    const auto b = compute_xva(c, atm_forward, full_margins(), HedgeStrategy::single_bond(), paths, many);
    EXPECT_EQ(a.value.as_array(), b.value.as_array());
    EXPECT_EQ(a.std_error.as_array(), b.std_error.as_array());
    EXPECT_EQ(a.profile.u, b.profile.u);
}

TEST(ComputeXva, RejectsInvalidSetups) {
    MarketCurves c = full_market();
    const auto rw = simulate_paths(c, 100.0, uniform_mesh(0.0, 1.0, 10), 10, 1, Measure::real_world);
    EXPECT_THROW(compute_xva(c, atm_forward, full_margins(), HedgeStrategy::single_bond(), rw), Error);

    const auto paths = pricing(c, 10, 1, 1.0, 10);
    McSettings s;
    s.quadrature_stride = 3;
    EXPECT_THROW(compute_xva(c, atm_forward, full_margins(), HedgeStrategy::single_bond(), paths, s), Error);

    const TradeSpec longer{PayoffKind::forward, 100.0, 2.0, 1};
    EXPECT_THROW(compute_xva(c, longer, full_margins(), HedgeStrategy::single_bond(), paths), Error);

    c.q_c = 0.03;
    EXPECT_THROW(compute_xva(c, atm_forward, full_margins(), HedgeStrategy::single_bond(), paths), Error);

    c = full_market();
    c.recovery.bond1 = c.recovery.bond2;
    try {
        compute_xva(c, atm_forward, full_margins(), HedgeStrategy::zero_hedge_error(), paths);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::strategy_unsolvable);
    }
}

TEST(FcaFixedPoint, NonConvergenceCarriesTrace) {
    UProfileSystem sys;
    sys.time = {0.0, 0.5, 1.0};
    sys.cum_rate = {0.0, 0.0, 0.0};
    sys.base = {1.0, 1.0, 1.0};
    sys.feedback = {0.5, 0.5, 0.5};
    try {
        fca_fixed_point(sys, {}, 3, 1e-15);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::non_convergence);
        ASSERT_EQ(e.trace().size(), 3u);
        EXPECT_GT(e.trace()[0], e.trace()[1]);
    }
    const auto r = fca_fixed_point(sys, {}, 100, 1e-14);
    const auto again = sys.apply(r.profile);
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(again[k], r.profile[k], 1e-13);
    EXPECT_EQ(r.profile[2], 0.0);
}

TEST(FcaFixedPoint, WarmStartAtSolutionStopsImmediately) {
    UProfileSystem sys{{0.0, 0.25, 0.5, 1.0}, {0.0, 0.01, 0.02, 0.04}, {0.2, -0.1, 0.3, 0.0}, {0.01, 0.01, 0.01, 0.01}};
    const auto r = fca_fixed_point(sys, {}, 50, 1e-15);
    const auto warm = fca_fixed_point(sys, r.profile, 50, 1e-14);
    EXPECT_EQ(warm.iterations, 1);
    EXPECT_THROW(fca_fixed_point(sys, {1.0}, 50, 1e-14), Error);
}
