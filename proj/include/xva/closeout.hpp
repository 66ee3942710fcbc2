#pragma once

#include <cmath>

#include "contracts.hpp"
#include "error.hpp"

namespace xva {

/// Close-out value to the bank when the bank defaults. I_C is returned to the
/// counterparty and does not enter.
inline double close_out_bank(double V, double X, double ib, double recovery_bank) {
    const double e = V - X + ib;
    return positive_part(e) + recovery_bank * negative_part(e) + X - ib;
}

/// Close-out value to the bank when the counterparty defaults. I_B does not enter.
inline double close_out_cpty(double V, double X, double ic, double recovery_cpty) {
    const double e = V - X - ic;
    return recovery_cpty * positive_part(e) + negative_part(e) + X + ic;
}

/// How the own-bond funding is split between the two seniorities.
struct HedgeStrategy {
    enum class Kind { zero_hedge_error, single_bond } kind = Kind::single_bond;
    int issued_bond = 2;  // single_bond only: the seniority used for funding (1 or 2)

    static HedgeStrategy zero_hedge_error() { return {Kind::zero_hedge_error, 2}; }
    static HedgeStrategy single_bond(int bond = 2) { return {Kind::single_bond, bond}; }

    void validate(const Recoveries& rec) const {
        require(issued_bond == 1 || issued_bond == 2, "issued_bond must be 1 or 2");
        if (kind == Kind::zero_hedge_error && rec.bond1 == rec.bond2)
            throw Error(ErrorKind::strategy_unsolvable, "zero-hedge-error strategy requires R_1 != R_2");
    }

    friend bool operator==(const HedgeStrategy&, const HedgeStrategy&) = default;
};

inline const char* to_string(HedgeStrategy::Kind k) {
    return k == HedgeStrategy::Kind::zero_hedge_error ? "zero-hedge-error" : "single-bond";
}

/// eps_h = g_B + R_1 a_1 P_1 + R_2 a_2 P_2 - X - phi K + I_B
inline double hedge_error(double g_b, double bond1_value, double bond2_value, double X, double phi_k, double ib,
                          double r1, double r2) {
    return g_b + r1 * bond1_value + r2 * bond2_value - X - phi_k + ib;
}

/// Market state seen by the hedger at one instant.
struct HedgeInputs {
    double v_hat;     // V + U
    double v;         // risk-free value
    double dv_hat_ds; // dV_hat/dS
    double S;
    double p1, p2, pc;
    Profiles margins;
    double phi;
};

struct HedgeState {
    double delta = 0.0;
    double alpha_c = 0.0;
    double alpha_1 = 0.0;
    double alpha_2 = 0.0;
    double beta_s = 0.0;
    double beta_c = 0.0;
    double beta_x = 0.0;
    double beta_k = 0.0;
    double beta_ib = 0.0;
    double g_b = 0.0;
    double g_c = 0.0;
    double eps_h = 0.0;

    double beta() const { return beta_s + beta_c + beta_x + beta_k + beta_ib; }
};

/// |V_hat + a_1 P_1 + a_2 P_2 + I_B - X - phi K|
inline double funding_residual(const HedgeInputs& in, const HedgeState& h) {
    return std::abs(in.v_hat + h.alpha_1 * in.p1 + h.alpha_2 * in.p2 + in.margins.ib - in.margins.X -
                    in.phi * in.margins.K);
}

inline double funding_scale(const HedgeInputs& in) {
    return std::abs(in.v_hat) + std::abs(in.margins.X) + std::abs(in.margins.ib) + in.phi * in.margins.K + 1.0;
}

/// Delta and counterparty-bond hedges that remove market and counterparty default
/// risk, with own-bond holdings solving the funding condition plus the strategy's
/// second equation.
inline HedgeState hedge_positions(const HedgeInputs& in, const Recoveries& rec, const HedgeStrategy& strategy) {
    require(in.p1 > 0.0 && in.p2 > 0.0 && in.pc > 0.0, "hedge_positions: bond prices must be positive");
    strategy.validate(rec);
    const auto& m = in.margins;
    const double phi_k = in.phi * m.K;

    HedgeState h;
    h.g_b = close_out_bank(in.v, m.X, m.ib, rec.bank);
    h.g_c = close_out_cpty(in.v, m.X, m.ic, rec.cpty);
    h.delta = -in.dv_hat_ds;
    h.alpha_c = (h.g_c - in.v_hat) / in.pc;

    // funding: A_1 + A_2 = F, with A_i = alpha_i P_i
    const double F = -(in.v_hat + m.ib - m.X - phi_k);
    double a1 = 0.0, a2 = 0.0;
    if (strategy.kind == HedgeStrategy::Kind::zero_hedge_error) {
        // eps_h = 0: R_1 A_1 + R_2 A_2 = G
        const double G = -(h.g_b - m.X - phi_k + m.ib);
        a1 = (G - rec.bond2 * F) / (rec.bond1 - rec.bond2);
        a2 = F - a1;
    } else if (strategy.issued_bond == 1) {
        a1 = F;
    } else {
        a2 = F;
    }
    h.alpha_1 = a1 / in.p1;
    h.alpha_2 = a2 / in.p2;

    h.beta_s = -h.delta * in.S;
    h.beta_c = -h.alpha_c * in.pc;
    h.beta_x = -m.X;
    h.beta_k = -phi_k;
    h.beta_ib = m.ib;
    h.eps_h = hedge_error(h.g_b, a1, a2, m.X, phi_k, m.ib, rec.bond1, rec.bond2);
    return h;
}

/// g_B + R_1 A_1 + R_2 A_2 written as `constant + u_coeff * U`, where U = V_hat - V.
///
/// The own-bond holdings depend on V_hat only through the funding condition, so
/// the recovery-weighted bond term is affine in U.
struct AffineInU {
    double constant;
    double u_coeff;

    double operator()(double U) const { return constant + u_coeff * U; }
};

inline AffineInU bank_default_funding_term(double V, const Profiles& m, double phi, const Recoveries& rec,
                                           const HedgeStrategy& strategy) {
    const double phi_k = phi * m.K;
    const double g_b = close_out_bank(V, m.X, m.ib, rec.bank);
    if (strategy.kind == HedgeStrategy::Kind::zero_hedge_error)
        return {m.X + phi_k - m.ib, 0.0};
    const double R = strategy.issued_bond == 1 ? rec.bond1 : rec.bond2;
    return {g_b - R * (V + m.ib - m.X - phi_k), -R};
}

} // namespace xva
