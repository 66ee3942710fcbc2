#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"
#include "market_model.hpp"

namespace xva {

enum class PayoffKind { forward, call, put };

inline const char* to_string(PayoffKind k) {
    switch (k) {
    case PayoffKind::forward: return "forward";
    case PayoffKind::call: return "european-call";
    case PayoffKind::put: return "european-put";
    }
    return "unknown";
}

struct TradeSpec {
    PayoffKind kind = PayoffKind::forward;
    double strike = 0.0;
    double maturity = 1.0;
    int sign = 1;  // +1 bank long, -1 bank short

    void validate() const {
        require(maturity > 0.0, "trade maturity must be positive");
        require(strike >= 0.0, "trade strike must be non-negative");
        require(sign == 1 || sign == -1, "trade sign must be +1 or -1");
    }

    friend bool operator==(const TradeSpec&, const TradeSpec&) = default;
};

inline double positive_part(double x) { return std::max(x, 0.0); }
inline double negative_part(double x) { return std::min(x, 0.0); }

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Integrated carry, discount and variance over [t, T].
struct Carry {
    double growth;    // exp(int (q_S - gamma_S))
    double discount;  // exp(-int r)
    double variance;  // int sigma^2
};

inline Carry carry(const MarketCurves& c, double t, double T) {
    return {std::exp(c.q_s.integral(t, T) - c.gamma_s.integral(t, T)), std::exp(-c.r.integral(t, T)),
            c.sigma.integral_of_square(t, T)};
}

struct ValueAndDelta {
    double value;
    double delta;
};

/// Risk-free value and dV/dS, defined for S >= 0 (S = 0 is the PDE boundary).
inline ValueAndDelta value_and_delta(const TradeSpec& trade, const Carry& k, double S) {
    const double K = trade.strike;
    const double fwd = S * k.growth;
    const double sgn = trade.sign;
    if (trade.kind == PayoffKind::forward)
        return {sgn * k.discount * (fwd - K), sgn * k.discount * k.growth};

    const bool call = trade.kind == PayoffKind::call;
    const double sd = std::sqrt(k.variance);
    if (sd == 0.0 || S == 0.0 || K == 0.0) {
        const double intrinsic = call ? positive_part(fwd - K) : positive_part(K - fwd);
        double d = 0.0;
        if (call && fwd > K)
            d = k.growth;
        else if (!call && fwd < K)
            d = -k.growth;
        return {sgn * k.discount * intrinsic, sgn * k.discount * d};
    }
    const double d1 = (std::log(fwd / K) + 0.5 * k.variance) / sd;
    const double d2 = d1 - sd;
    if (call) {
        const double n1 = normal_cdf(d1);
        return {sgn * k.discount * (fwd * n1 - K * normal_cdf(d2)), sgn * k.discount * k.growth * n1};
    }
    const double m1 = normal_cdf(-d1);
    return {sgn * k.discount * (K * normal_cdf(-d2) - fwd * m1), -sgn * k.discount * k.growth * m1};
}

} // namespace detail

/// Discounted pricing-measure expectation of the payoff: carry q_S - gamma_S,
/// discounting at r.
inline double risk_free_value(const TradeSpec& trade, const MarketCurves& curves, double t, double S) {
    require(S > 0.0, "risk_free_value: S must be positive");
    require(t <= trade.maturity, "risk_free_value: t beyond maturity");
    return detail::value_and_delta(trade, detail::carry(curves, t, trade.maturity), S).value;
}

inline double risk_free_delta(const TradeSpec& trade, const MarketCurves& curves, double t, double S) {
    require(S > 0.0, "risk_free_delta: S must be positive");
    require(t <= trade.maturity, "risk_free_delta: t beyond maturity");
    return detail::value_and_delta(trade, detail::carry(curves, t, trade.maturity), S).delta;
}

/// Margin or capital amount as a function of the risk-free value.
struct ProfileRule {
    enum class Kind { constant, proportional } kind = Kind::constant;
    double value = 0.0;  // c for constant, kappa for proportional (kappa * |V|)

    static ProfileRule constant(double c) { return {Kind::constant, c}; }
    static ProfileRule proportional(double kappa) { return {Kind::proportional, kappa}; }

    double operator()(double V) const { return kind == Kind::constant ? value : value * std::abs(V); }

    friend bool operator==(const ProfileRule&, const ProfileRule&) = default;
};

struct MarginCapitalSpec {
    double vm_fraction = 0.0;  // X = chi * V
    ProfileRule ib;            // initial margin posted by the bank
    ProfileRule ic;            // initial margin received from the counterparty
    ProfileRule capital;       // regulatory capital K
    double phi = 0.0;          // fraction of capital available for funding

    void validate() const {
        require(vm_fraction >= 0.0 && vm_fraction <= 1.0, "vm_fraction must lie in [0,1]");
        require(phi >= 0.0 && phi <= 1.0, "phi must lie in [0,1]");
        require(ib.value >= 0.0 && ic.value >= 0.0 && capital.value >= 0.0,
                "margin and capital rule parameters must be non-negative");
    }

    friend bool operator==(const MarginCapitalSpec&, const MarginCapitalSpec&) = default;
};

struct Profiles {
    double X;   // variation margin held by the bank (negative when posted)
    double ib;  // I_B >= 0
    double ic;  // I_C >= 0
    double K;   // capital >= 0
};

inline Profiles profiles(const MarginCapitalSpec& spec, double V) {
    return {spec.vm_fraction * V, spec.ib(V), spec.ic(V), spec.capital(V)};
}

} // namespace xva
