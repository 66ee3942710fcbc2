#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <xva/closeout.hpp>

using namespace xva;

namespace {

struct Sample {
    HedgeInputs in;
    Recoveries rec;
};

Sample random_sample(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Sample s;
    const double V = -30.0 + 60.0 * u(rng);
    const double U = -2.0 + 4.0 * u(rng);
    const double chi = u(rng);
    s.in = {V + U, V, 0.2 + u(rng), 50.0 + 100.0 * u(rng), 0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng),
            0.5 + 0.5 * u(rng), {chi * V, 5.0 * u(rng), 5.0 * u(rng), 8.0 * u(rng)}, u(rng)};
    s.rec = {0.5 * u(rng), 0.5 + 0.5 * u(rng), u(rng), u(rng)};
    return s;
}

} // namespace

TEST(CloseOut, HandComputedCases) {
    // V - X + I_B = 12 - 2 + 1 = 11 > 0
    EXPECT_DOUBLE_EQ(close_out_bank(12.0, 2.0, 1.0, 0.4), 11.0 + 2.0 - 1.0);
    // V - X + I_B = -8 - 2 + 1 = -9 < 0
    EXPECT_DOUBLE_EQ(close_out_bank(-8.0, 2.0, 1.0, 0.4), 0.4 * -9.0 + 2.0 - 1.0);
    // V - X - I_C = 12 - 2 - 3 = 7 > 0
    EXPECT_DOUBLE_EQ(close_out_cpty(12.0, 2.0, 3.0, 0.4), 0.4 * 7.0 + 2.0 + 3.0);
    EXPECT_DOUBLE_EQ(close_out_cpty(-8.0, 2.0, 3.0, 0.4), -13.0 + 2.0 + 3.0);
}

TEST(CloseOut, FullRecoveryGivesRiskFreeValue) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 500; ++i) {
        const double V = u(rng), X = u(rng);
        EXPECT_NEAR(close_out_bank(V, X, 0.0, 1.0), V, 1e-12);
        EXPECT_NEAR(close_out_cpty(V, X, 0.0, 1.0), V, 1e-12);
        // full collateralisation removes any loss
        EXPECT_DOUBLE_EQ(close_out_cpty(V, V, 0.0, 0.3), V);
        // losses only ever reduce the close-out relative to V
        EXPECT_LE(close_out_cpty(V, X, 0.0, 0.3), V + 1e-12);
        EXPECT_GE(close_out_bank(V, X, 0.0, 0.3), V - 1e-12);
    }
}

TEST(HedgePositions, ZeroHedgeErrorSolvesBothEquations) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 500; ++i) {
        const auto s = random_sample(rng);
        const auto h = hedge_positions(s.in, s.rec, HedgeStrategy::zero_hedge_error());
        const double scale = funding_scale(s.in);
        EXPECT_LE(funding_residual(s.in, h), 1e-12 * scale);
        EXPECT_LE(std::abs(h.eps_h), 1e-12 * scale);

        // independent 2x2 solve by Cramer's rule
        const auto& m = s.in.margins;
        const double F = -(s.in.v_hat + m.ib - m.X - s.in.phi * m.K);
        const double G = -(close_out_bank(s.in.v, m.X, m.ib, s.rec.bank) - m.X - s.in.phi * m.K + m.ib);
        const double det = s.rec.bond2 - s.rec.bond1;
        const double a1 = (F * s.rec.bond2 - G) / det;
        const double a2 = (G - s.rec.bond1 * F) / det;
        EXPECT_NEAR(h.alpha_1 * s.in.p1, a1, 1e-9 * (std::abs(a1) + 1.0));
        EXPECT_NEAR(h.alpha_2 * s.in.p2, a2, 1e-9 * (std::abs(a2) + 1.0));
    }
}

TEST(HedgePositions, SingleBondFundsWithIssuedBond) {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
        const auto s = random_sample(rng);
        for (int bond : {1, 2}) {
            const auto h = hedge_positions(s.in, s.rec, HedgeStrategy::single_bond(bond));
            EXPECT_LE(funding_residual(s.in, h), 1e-12 * funding_scale(s.in));
            EXPECT_EQ(bond == 1 ? h.alpha_2 : h.alpha_1, 0.0);
        }
    }
}

TEST(HedgePositions, DeltaAndCounterpartyBond) {
    HedgeInputs in{10.5, 10.0, 0.6, 100.0, 0.9, 0.95, 0.8, {5.0, 1.0, 2.0, 3.0}, 0.5};
    const Recoveries rec{0.0, 0.4, 0.4, 0.4};
    const auto h = hedge_positions(in, rec, HedgeStrategy::single_bond());
    EXPECT_DOUBLE_EQ(h.delta, -0.6);
    const double g_c = close_out_cpty(10.0, 5.0, 2.0, 0.4);
    EXPECT_DOUBLE_EQ(h.alpha_c, (g_c - 10.5) / 0.8);
    EXPECT_DOUBLE_EQ(h.beta_s, 60.0);
    EXPECT_DOUBLE_EQ(h.beta_x, -5.0);
    EXPECT_DOUBLE_EQ(h.beta_k, -1.5);
    EXPECT_DOUBLE_EQ(h.beta_ib, 1.0);
}

TEST(HedgePositions, EqualRecoveriesAreUnsolvable) {
    HedgeInputs in{1.0, 1.0, 0.5, 100.0, 0.9, 0.9, 0.9, {0.0, 0.0, 0.0, 0.0}, 0.0};
    const Recoveries rec{0.4, 0.4, 0.4, 0.4};
    try {
        hedge_positions(in, rec, HedgeStrategy::zero_hedge_error());
        FAIL() << "expected strategy_unsolvable";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::strategy_unsolvable);
    }
    EXPECT_NO_THROW(hedge_positions(in, rec, HedgeStrategy::single_bond()));
    EXPECT_THROW(hedge_positions(in, rec, HedgeStrategy::single_bond(3)), Error);
    in.p1 = 0.0;
    EXPECT_THROW(hedge_positions(in, rec, HedgeStrategy::single_bond()), Error);
}

TEST(BankDefaultFundingTerm, MatchesHedgePositionsForAnyU) {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 300; ++i) {
        const auto s = random_sample(rng);
        for (auto strategy : {HedgeStrategy::zero_hedge_error(), HedgeStrategy::single_bond(1),
                              HedgeStrategy::single_bond(2)}) {
            const auto h = hedge_positions(s.in, s.rec, strategy);
            const double direct = h.g_b + s.rec.bond1 * h.alpha_1 * s.in.p1 + s.rec.bond2 * h.alpha_2 * s.in.p2;
            const auto affine = bank_default_funding_term(s.in.v, s.in.margins, s.in.phi, s.rec, strategy);
            EXPECT_NEAR(affine(s.in.v_hat - s.in.v), direct, 1e-10 * funding_scale(s.in));
        }
    }
}
