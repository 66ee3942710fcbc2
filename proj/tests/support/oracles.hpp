#pragma once

// Test-only reference computations. Nothing here calls into the engines under test.

#include <cmath>
#include <numbers>
#include <algorithm>
#include <tuple>
#include <utility>
#include <vector>

namespace xva_test {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15)
                break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

template <class F>
double integrate(F&& f, double a, double b, int n = 64) {
    static thread_local std::vector<double> xs, ws;
    static thread_local int cached = 0;
    if (cached != n) {
        std::tie(xs, ws) = gauss_legendre(n);
        cached = n;
    }
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s += ws[i] * f(m + h * xs[i]);
    return s * h;
}

/// Constant-parameter market for the closed-form oracles.
struct FlatMarket {
    double r, lambda_c, lambda_b, recovery_c, sigma, carry, s0;  // carry = q_S - gamma_S
};

/// Long forward value at time u given S_u, written directly from the discounted payoff.
inline double forward_value(const FlatMarket& m, double strike, double T, double u, double S) {
    return S * std::exp((m.carry - m.r) * (T - u)) - strike * std::exp(-m.r * (T - u));
}

/// E[(V(u, S_u))^+] for a long forward, as a 1-D Gaussian integral split at the kink.
inline double forward_epe(const FlatMarket& m, double strike, double T, double u) {
    if (u == 0.0)
        return std::max(forward_value(m, strike, T, 0.0, m.s0), 0.0);
    const double sd = m.sigma * std::sqrt(u);
    const double mean = std::log(m.s0) + (m.carry - 0.5 * m.sigma * m.sigma) * u;
    const double s_kink = strike * std::exp(-m.carry * (T - u));
    const double z_kink = (std::log(s_kink) - mean) / sd;
    const double lo = std::max(z_kink, -12.0), hi = 12.0;
    if (lo >= hi)
        return 0.0;
    auto integrand = [&](double z) {
        const double S = std::exp(mean + sd * z);
        return std::max(forward_value(m, strike, T, u, S), 0.0) * std::exp(-0.5 * z * z) /
               std::sqrt(2.0 * std::numbers::pi);
    };
    // split further so each panel is smooth and well resolved
    double total = 0.0;
    const int panels = 8;
    for (int p = 0; p < panels; ++p)
        total += integrate(integrand, lo + (hi - lo) * p / panels, lo + (hi - lo) * (p + 1) / panels, 32);
    return total;
}

/// -(1 - R_C) int_0^T D(0,u) lambda_C EPE(u) du for an uncollateralised long forward.
/// Substituting u = T v^2 removes the sqrt(u) behaviour of EPE at the origin.
inline double forward_cva(const FlatMarket& m, double strike, double T) {
    const double rate = m.r + m.lambda_b + m.lambda_c;
    auto integrand = [&](double v) {
        const double u = T * v * v;
        return std::exp(-rate * u) * forward_epe(m, strike, T, u) * 2.0 * T * v;
    };
    double total = 0.0;
    for (int p = 0; p < 4; ++p)
        total += integrate(integrand, p / 4.0, (p + 1) / 4.0, 32);
    return -(1.0 - m.recovery_c) * m.lambda_c * total;
}

} // namespace xva_test
