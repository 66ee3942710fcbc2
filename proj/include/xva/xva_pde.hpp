#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "closeout.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "market_model.hpp"

namespace xva {

enum class Spacing { uniform, log };

struct PdeGrid {
    std::size_t space_intervals = 400;  // J; nodes S_0 .. S_J
    std::size_t time_steps = 200;
    double s_max = 0.0;  // <= 0: 8 * max(S_0, strike)
    Spacing spacing = Spacing::uniform;
    double theta = 0.5;  // 0.5 Crank-Nicolson, 1 fully implicit
    bool rannacher = true;
    bool keep_surface = false;
    std::size_t source_subcells = 8;  // midpoint samples per cell when averaging the source; 1 = pointwise

    double effective_s_max(double s0, double strike) const {
        return s_max > 0.0 ? s_max : 8.0 * std::max(s0, strike);
    }

    void validate(double s0, double strike) const {
        require(space_intervals >= 4, "PDE grid too coarse: need at least 3 interior space nodes");
        require(time_steps >= 2, "PDE grid needs at least 2 time steps");
        require(theta >= 0.0 && theta <= 1.0, "theta must lie in [0,1]");
        require(source_subcells >= 1, "source_subcells must be at least 1");
        require(effective_s_max(s0, strike) >= 5.0 * std::max(s0, strike), "S_max must be at least 5 * max(S_0, K)");
    }

    PdeGrid refined() const {
        PdeGrid g = *this;
        g.space_intervals *= 2;
        g.time_steps *= 2;
        return g;
    }

    friend bool operator==(const PdeGrid&, const PdeGrid&) = default;
};

/// U(t, S) on the space nodes; the full surface is kept when requested.
struct PdeSolution {
    std::vector<double> s;
    std::vector<double> t;
    std::vector<double> u0;       // U(t_0, .)
    std::vector<double> surface;  // row m holds U(t_m, .), when kept
    double value = 0.0;           // U(t_0, S_0)

    std::size_t n_space() const { return s.size(); }

    /// Quadratic Lagrange interpolation in S on a stored time row.
    double interpolate_row(const double* row, double S) const {
        const std::size_t J = s.size() - 1;
        if (S <= s.front())
            return row[0];
        if (S >= s.back())
            return row[J];
        std::size_t i = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), S) - s.begin());
        i = std::clamp<std::size_t>(i, 1, J);
        std::size_t c = (S - s[i - 1] < s[i] - S) ? i - 1 : i;  // nearest node
        c = std::clamp<std::size_t>(c, 1, J - 1);
        const double x0 = s[c - 1], x1 = s[c], x2 = s[c + 1];
        const double l0 = (S - x1) * (S - x2) / ((x0 - x1) * (x0 - x2));
        const double l1 = (S - x0) * (S - x2) / ((x1 - x0) * (x1 - x2));
        const double l2 = (S - x0) * (S - x1) / ((x2 - x0) * (x2 - x1));
        return l0 * row[c - 1] + l1 * row[c] + l2 * row[c + 1];
    }

    /// U and dU/dS at (t, S) from the stored surface: linear in t, quadratic in S,
    /// with the S-derivative from central differences on the nodes.
    std::pair<double, double> value_and_slope(double tq, double S) const {
        require(!surface.empty(), "PDE surface was not kept");
        const std::size_t n = s.size();
        tq = std::clamp(tq, t.front(), t.back());
        std::size_t m = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), tq) - t.begin());
        m = std::clamp<std::size_t>(m, 1, t.size() - 1);
        const double w = (tq - t[m - 1]) / (t[m] - t[m - 1]);
        const double* lo = surface.data() + (m - 1) * n;
        const double* hi = surface.data() + m * n;
        const double u = (1.0 - w) * interpolate_row(lo, S) + w * interpolate_row(hi, S);
        const double slope = (1.0 - w) * slope_row(lo, S) + w * slope_row(hi, S);
        return {u, slope};
    }

  private:
    double slope_row(const double* row, double S) const {
        const std::size_t J = s.size() - 1;
        auto node_slope = [&](std::size_t j) {
            if (j == 0)
                return (row[1] - row[0]) / (s[1] - s[0]);
            if (j == J)
                return (row[J] - row[J - 1]) / (s[J] - s[J - 1]);
            return (row[j + 1] - row[j - 1]) / (s[j + 1] - s[j - 1]);
        };
        if (S <= s.front())
            return node_slope(0);
        if (S >= s.back())
            return node_slope(J);
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), S) - s.begin());
        const double w = (S - s[i - 1]) / (s[i] - s[i - 1]);
        return (1.0 - w) * node_slope(i - 1) + w * node_slope(i);
    }
};

namespace detail {

inline std::vector<double> space_nodes(const PdeGrid& g, double s_max) {
    const std::size_t J = g.space_intervals;
    std::vector<double> s(J + 1, 0.0);
    if (g.spacing == Spacing::uniform) {
        for (std::size_t j = 0; j <= J; ++j)
            s[j] = s_max * static_cast<double>(j) / static_cast<double>(J);
    } else {
        const double s_lo = 1e-3 * s_max;
        for (std::size_t j = 1; j <= J; ++j)
            s[j] = s_lo * std::pow(s_max / s_lo, static_cast<double>(j - 1) / static_cast<double>(J - 1));
    }
    s[J] = s_max;
    return s;
}

struct StepRates {
    double sigma2, carry, rho;  // operator
    double lambda_b, lambda_c, s_x, s_k, s_ib;
};

inline void thomas_solve(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
                         std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

class AdjustmentPde {
  public:
    AdjustmentPde(const MarketCurves& curves, const TradeSpec& trade, const MarginCapitalSpec& margins,
                  const HedgeStrategy& strategy, std::vector<double> s, std::size_t subcells)
        : c_(curves), trade_(trade), margins_(margins), strategy_(strategy), s_(std::move(s)), subcells_(subcells) {
        u_coeff_ = bank_default_funding_term(0.0, {0.0, 0.0, 0.0, 0.0}, margins.phi, curves.recovery, strategy).u_coeff;
    }

    StepRates rates(double t) const {
        const double r = c_.r(t), lb = c_.lambda_b(t), lc = c_.lambda_c(t), sg = c_.sigma(t);
        return {sg * sg,        c_.q_s(t) - c_.gamma_s(t), r + lb + lc + lb * u_coeff_, lb, lc, c_.r_x(t) - r,
                c_.gamma_k(t) - r, c_.r_ib(t) - r};
    }

    /// Source of the adjustment PDE at (t, S) with the U-affine part of eps_h removed.
    double source_at(const Carry& carry_t, const StepRates& k, double S) const {
        const auto& rec = c_.recovery;
        const double phi = margins_.phi;
        const double V = value_and_delta(trade_, carry_t, S).value;
        const Profiles p = profiles(margins_, V);
        const double g_b = close_out_bank(V, p.X, p.ib, rec.bank);
        const double g_c = close_out_cpty(V, p.X, p.ic, rec.cpty);
        const double eps0 = bank_default_funding_term(V, p, phi, rec, strategy_).constant - p.X - phi * p.K + p.ib;
        return -k.lambda_b * (g_b - V) - k.lambda_c * (g_c - V) + k.lambda_b * eps0 + k.s_x * p.X +
               k.s_k * phi * p.K - k.s_ib * p.ib;
    }

    /// Source on the nodes, averaged over each node's dual cell. The exposure
    /// kinks move across the grid in time; averaging keeps their contribution
    /// smooth in the node position.
    std::vector<double> source(double t, const StepRates& k) const {
        const Carry carry_t = carry(c_, t, trade_.maturity);
        const std::size_t J = s_.size() - 1;
        std::vector<double> f(s_.size());
        f[0] = source_at(carry_t, k, s_[0]);
        f[J] = source_at(carry_t, k, s_[J]);
        for (std::size_t j = 1; j < J; ++j) {
            if (subcells_ == 1) {
                f[j] = source_at(carry_t, k, s_[j]);
                continue;
            }
            const double lo = 0.5 * (s_[j - 1] + s_[j]), hi = 0.5 * (s_[j] + s_[j + 1]);
            double acc = 0.0;
            for (std::size_t i = 0; i < subcells_; ++i)
                acc += source_at(carry_t, k, lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(subcells_));
            f[j] = acc / static_cast<double>(subcells_);
        }
        return f;
    }

    /// One theta step from `u` at t_hi back to t_lo (in place).
    void step(std::vector<double>& u, double t_hi, double t_lo, double theta) const {
        const std::size_t J = s_.size() - 1;
        const double dt = t_hi - t_lo;
        const StepRates k = rates(0.5 * (t_lo + t_hi));
        const std::vector<double> f_hi = source(t_hi, k);
        const std::vector<double> f_lo = source(t_lo, k);

        std::vector<double> a(J + 1, 0.0), b(J + 1, 0.0), c(J + 1, 0.0);
        b[0] = -k.rho;
        for (std::size_t j = 1; j < J; ++j) {
            const double hm = s_[j] - s_[j - 1], hp = s_[j + 1] - s_[j];
            const double diff = 0.5 * k.sigma2 * s_[j] * s_[j];
            const double conv = k.carry * s_[j];
            a[j] = diff * 2.0 / (hm * (hm + hp)) - conv * hp / (hm * (hm + hp));
            c[j] = diff * 2.0 / (hp * (hm + hp)) + conv * hm / (hp * (hm + hp));
            b[j] = -diff * 2.0 / (hm * hp) + conv * (hp - hm) / (hm * hp) - k.rho;
        }

        // unknowns 0..J-1; U_J = 2 U_{J-1} - U_{J-2}
        const std::size_t n = J;
        std::vector<double> lower(n, 0.0), diag(n), upper(n, 0.0), rhs(n);
        for (std::size_t j = 0; j < n; ++j) {
            double lu = b[j] * u[j];
            if (j > 0)
                lu += a[j] * u[j - 1];
            lu += c[j] * u[j + 1];
            rhs[j] = u[j] + (1.0 - theta) * dt * lu - dt * (theta * f_lo[j] + (1.0 - theta) * f_hi[j]);
            lower[j] = -theta * dt * a[j];
            diag[j] = 1.0 - theta * dt * b[j];
            upper[j] = -theta * dt * c[j];
        }
        lower[n - 1] = -theta * dt * (a[n - 1] - c[n - 1]);
        diag[n - 1] = 1.0 - theta * dt * (b[n - 1] + 2.0 * c[n - 1]);
        upper[n - 1] = 0.0;

        thomas_solve(lower, diag, upper, rhs);
        for (std::size_t j = 0; j < n; ++j)
            u[j] = rhs[j];
        u[J] = 2.0 * u[J - 1] - u[J - 2];
    }

  private:
    const MarketCurves& c_;
    const TradeSpec& trade_;
    const MarginCapitalSpec& margins_;
    const HedgeStrategy& strategy_;
    std::vector<double> s_;
    std::size_t subcells_ = 1;
    double u_coeff_ = 0.0;
};

} // namespace detail

/// Backward theta-scheme solution of the adjustment PDE from U(T, .) = 0 to t_0.
///
/// The U-dependent part of the own-default hedge error enters the effective
/// discount rate, so the solve is linear and needs no fixed point.
inline PdeSolution solve_pde(const MarketCurves& curves, const TradeSpec& trade, const MarginCapitalSpec& margins,
                             const HedgeStrategy& strategy, const PdeGrid& grid, double s0, double t0 = 0.0) {
    curves.validate();
    trade.validate();
    margins.validate();
    strategy.validate(curves.recovery);
    grid.validate(s0, trade.strike);
    require(s0 > 0.0, "solve_pde: S_0 must be positive");
    require(t0 < trade.maturity, "solve_pde: t_0 must precede maturity");

    PdeSolution sol;
    sol.s = detail::space_nodes(grid, grid.effective_s_max(s0, trade.strike));
    const std::size_t N = grid.time_steps;
    sol.t.resize(N + 1);
    for (std::size_t m = 0; m <= N; ++m)
        sol.t[m] = t0 + (trade.maturity - t0) * static_cast<double>(m) / static_cast<double>(N);
    sol.t.back() = trade.maturity;

    const std::size_t n_s = sol.s.size();
    detail::AdjustmentPde pde(curves, trade, margins, strategy, sol.s, grid.source_subcells);
    std::vector<double> u(n_s, 0.0);
    if (grid.keep_surface) {
        sol.surface.assign((N + 1) * n_s, 0.0);
    }
    for (std::size_t m = N; m-- > 0;) {
        const double hi = sol.t[m + 1], lo = sol.t[m];
        if (m == N - 1 && grid.rannacher && grid.theta < 1.0) {
            const double mid = 0.5 * (lo + hi);
            pde.step(u, hi, mid, 1.0);
            pde.step(u, mid, lo, 1.0);
        } else {
            pde.step(u, hi, lo, grid.theta);
        }
        if (grid.keep_surface)
            std::copy(u.begin(), u.end(), sol.surface.begin() + static_cast<std::ptrdiff_t>(m * n_s));
    }
    for (double x : u)
        if (!std::isfinite(x))
            throw Error(ErrorKind::numerical, "PDE solution is not finite");
    sol.u0 = u;
    sol.value = sol.interpolate_row(sol.u0.data(), s0);
    return sol;
}

struct RichardsonEstimate {
    double coarse;
    double fine;
    double extrapolated;
    double error;  // |fine - extrapolated|
};

/// Two-level Richardson estimate assuming order `order` in the refinement ratio 2.
inline RichardsonEstimate richardson(double coarse, double fine, double order = 2.0) {
    const double f = std::pow(2.0, order);
    const double extrapolated = fine + (fine - coarse) / (f - 1.0);
    return {coarse, fine, extrapolated, std::abs(fine - extrapolated)};
}

/// Observed order from three successive refinements.
inline double observed_order(double coarse, double mid, double fine) {
    return std::log2(std::abs(coarse - mid) / std::abs(mid - fine));
}

} // namespace xva
