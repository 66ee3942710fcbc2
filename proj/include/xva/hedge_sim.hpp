#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "closeout.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "market_model.hpp"
#include "parallel.hpp"
#include "xva_pde.hpp"

namespace xva {

struct DefaultScenario {
    enum class Kind { none, bank, cpty, poisson } kind = Kind::none;
    double time = 0.0;  // forced default time for bank / cpty

    static DefaultScenario none() { return {Kind::none, 0.0}; }
    static DefaultScenario bank(double t) { return {Kind::bank, t}; }
    static DefaultScenario cpty(double t) { return {Kind::cpty, t}; }
    static DefaultScenario poisson() { return {Kind::poisson, 0.0}; }

    friend bool operator==(const DefaultScenario&, const DefaultScenario&) = default;
};

enum class DefaultEvent { none, bank, cpty };

struct LedgerStep {
    double t = 0.0;
    double S = 0.0;
    double v = 0.0;
    double u = 0.0;
    double v_hat = 0.0;
    double p1 = 0.0, p2 = 0.0, pc = 0.0;
    HedgeState hedge;
    double portfolio = 0.0;         // Pi after rebalancing
    double funding_residual = 0.0;  // |V_hat + A_1 + A_2 + I_B - X - phi K|
    double scale = 1.0;
    double leak = 0.0;             // (V_hat + Pi) change over the step into this node
    double cumulative_leak = 0.0;
};

struct LedgerPath {
    std::vector<LedgerStep> steps;
    double tau_b = std::numeric_limits<double>::infinity();
    double tau_c = std::numeric_limits<double>::infinity();
    DefaultEvent event = DefaultEvent::none;
    std::size_t event_node = 0;
    double default_jump = 0.0;     // realized change of V_hat + Pi at the default node
    double expected_jump = 0.0;    // eps_h for bank default, g_C - V_hat - alpha_C P_C for cpty default
};

namespace detail {

/// First mesh node at or after the time where cumulative hazard reaches `level`.
inline std::size_t node_at_cumulative_hazard(const Curve& hazard, std::span<const double> mesh, double level,
                                             double& tau) {
    double acc = 0.0;
    for (std::size_t m = 1; m < mesh.size(); ++m) {
        const double h = hazard.integral(mesh[m - 1], mesh[m]);
        if (acc + h >= level) {
            const double rate = hazard(mesh[m - 1]);
            tau = mesh[m - 1] + (rate > 0.0 ? (level - acc) / rate : 0.0);
            return m;
        }
        acc += h;
    }
    tau = std::numeric_limits<double>::infinity();
    return mesh.size();
}

inline std::size_t first_node_at_or_after(std::span<const double> mesh, double tau) {
    return static_cast<std::size_t>(std::lower_bound(mesh.begin(), mesh.end(), tau - 1e-12) - mesh.begin());
}

} // namespace detail

/// Steps the semi-replication ledger along one path. Positions are held over each
/// step while the cash sub-accounts accrue; the portfolio is rebalanced at every
/// node and the rebalancing mismatch is booked as the leak. Defaults fire at the
/// first node at or after the default time, after that node's rebalance.
inline LedgerPath simulate_hedge(std::span<const double> path, std::span<const double> mesh,
                                 const MarketCurves& curves, const TradeSpec& trade,
                                 const MarginCapitalSpec& margins, const HedgeStrategy& strategy,
                                 const PdeSolution& adjustment, DefaultScenario scenario,
                                 std::uint64_t seed = 0, std::uint64_t path_index = 0) {
    require(path.size() == mesh.size() && mesh.size() >= 2, "simulate_hedge: path/mesh size mismatch");
    require(!adjustment.surface.empty(), "simulate_hedge: missing U surface");
    require(adjustment.t.front() <= mesh.front() + 1e-12 && adjustment.t.back() >= mesh.back() - 1e-12,
            "simulate_hedge: U surface does not cover the path mesh");
    strategy.validate(curves.recovery);
    const auto& rec = curves.recovery;
    const double t0 = mesh.front();

    LedgerPath out;
    std::size_t bank_node = mesh.size(), cpty_node = mesh.size();
    switch (scenario.kind) {
    case DefaultScenario::Kind::none: break;
    case DefaultScenario::Kind::bank:
    case DefaultScenario::Kind::cpty: {
        require(scenario.time > t0 && scenario.time <= mesh.back(), "simulate_hedge: default time outside mesh");
        const std::size_t node = detail::first_node_at_or_after(mesh, scenario.time);
        if (scenario.kind == DefaultScenario::Kind::bank) {
            out.tau_b = scenario.time;
            bank_node = node;
        } else {
            out.tau_c = scenario.time;
            cpty_node = node;
        }
        break;
    }
    case DefaultScenario::Kind::poisson: {
        auto engine = stream_engine(seed, path_index, 1);
        std::exponential_distribution<double> exp1(1.0);
        const double eb = exp1(engine), ec = exp1(engine);
        bank_node = detail::node_at_cumulative_hazard(curves.lambda_b, mesh, eb, out.tau_b);
        cpty_node = detail::node_at_cumulative_hazard(curves.lambda_c, mesh, ec, out.tau_c);
        break;
    }
    }
    const std::size_t default_node = std::min(bank_node, cpty_node);
    const std::size_t last = std::min(default_node, mesh.size() - 1);

    auto state_at = [&](std::size_t m) {
        LedgerStep st;
        st.t = mesh[m];
        st.S = path[m];
        const auto vd = detail::value_and_delta(trade, detail::carry(curves, st.t, trade.maturity), st.S);
        const auto [u, du] = adjustment.value_and_slope(st.t, st.S);
        st.v = vd.value;
        st.u = m + 1 == mesh.size() ? 0.0 : u;
        st.v_hat = st.v + st.u;
        const double dvh = vd.delta + (m + 1 == mesh.size() ? 0.0 : du);
        st.p1 = std::exp(curves.r.integral(t0, st.t) + (1.0 - rec.bond1) * curves.lambda_b.integral(t0, st.t));
        st.p2 = std::exp(curves.r.integral(t0, st.t) + (1.0 - rec.bond2) * curves.lambda_b.integral(t0, st.t));
        st.pc = std::exp(curves.r.integral(t0, st.t) + curves.lambda_c.integral(t0, st.t));
        const HedgeInputs in{st.v_hat, st.v, dvh, st.S, st.p1, st.p2, st.pc, profiles(margins, st.v), margins.phi};
        st.hedge = hedge_positions(in, rec, strategy);
        const auto& h = st.hedge;
        st.portfolio = h.delta * st.S + h.alpha_c * st.pc + h.alpha_1 * st.p1 + h.alpha_2 * st.p2 + h.beta();
        st.funding_residual = funding_residual(in, h);
        st.scale = funding_scale(in);
        return std::pair{st, in};
    };

    auto [first, first_in] = state_at(0);
    out.steps.reserve(last + 1);
    out.steps.push_back(first);
    HedgeInputs inputs = first_in;

    for (std::size_t m = 0; m < last; ++m) {
        const LedgerStep& prev = out.steps.back();
        const auto& h = prev.hedge;
        const double a = mesh[m], b = mesh[m + 1];
        const auto& pm = inputs.margins;

        // self-financing evolution with positions held over [a, b]
        const double beta = h.beta_s + h.delta * prev.S * (curves.gamma_s.integral(a, b) - curves.q_s.integral(a, b)) +
                            h.beta_c - h.alpha_c * prev.pc * curves.q_c.integral(a, b) +
                            h.beta_x - pm.X * curves.r_x.integral(a, b) +
                            h.beta_k - margins.phi * pm.K * curves.gamma_k.integral(a, b) +
                            h.beta_ib + pm.ib * curves.r_ib.integral(a, b);

        auto [next, next_in] = state_at(m + 1);
        const double held = h.delta * next.S + h.alpha_c * next.pc + h.alpha_1 * next.p1 + h.alpha_2 * next.p2 + beta;
        next.leak = (next.v_hat + held) - (prev.v_hat + prev.portfolio);
        next.cumulative_leak = prev.cumulative_leak + next.leak;
        out.steps.push_back(next);
        inputs = next_in;
    }

    if (default_node < mesh.size()) {
        const LedgerStep& st = out.steps.back();
        const auto& h = st.hedge;
        out.event_node = default_node;
        const double before = st.v_hat + st.portfolio;
        if (bank_node <= cpty_node) {
            out.event = DefaultEvent::bank;
            const double after_portfolio =
                st.portfolio + h.alpha_1 * (rec.bond1 - 1.0) * st.p1 + h.alpha_2 * (rec.bond2 - 1.0) * st.p2;
            out.default_jump = (h.g_b + after_portfolio) - before;
            out.expected_jump = h.eps_h;
        } else {
            out.event = DefaultEvent::cpty;
            const double after_portfolio = st.portfolio - h.alpha_c * st.pc;
            out.default_jump = (h.g_c + after_portfolio) - before;
            out.expected_jump = h.g_c - st.v_hat - h.alpha_c * st.pc;
        }
    }
    return out;
}

/// Cross-path statistics of the pre-default cumulative leak.
struct LeakStatistics {
    std::vector<double> time;
    std::vector<double> mean_cumulative_leak;
    std::vector<double> rms_cumulative_leak;
    std::vector<double> max_abs_cumulative_leak;
    std::vector<std::size_t> alive;  // paths not yet defaulted at each node
    double max_funding_residual = 0.0;  // relative to scale
    double max_cpty_jump = 0.0;         // relative to scale
    double max_bank_jump_mismatch = 0.0;  // |jump - eps_h| / scale
    double max_bank_jump = 0.0;           // |jump| / scale
    std::size_t bank_defaults = 0;
    std::size_t cpty_defaults = 0;

    /// max over nodes of |mean cumulative leak|
    double mean_leak_metric() const {
        double m = 0.0;
        for (double x : mean_cumulative_leak)
            m = std::max(m, std::abs(x));
        return m;
    }
    double rms_leak_metric() const {
        double m = 0.0;
        for (double x : rms_cumulative_leak)
            m = std::max(m, x);
        return m;
    }
};

inline LeakStatistics simulate_hedge_batch(const PathGrid& paths, const MarketCurves& curves, const TradeSpec& trade,
                                           const MarginCapitalSpec& margins, const HedgeStrategy& strategy,
                                           const PdeSolution& adjustment, DefaultScenario scenario,
                                           unsigned threads = 1) {
    const auto mesh = paths.mesh();
    const std::size_t n_nodes = mesh.size();
    const std::size_t n_paths = paths.n_paths();
    constexpr std::size_t block_size = 256;
    const std::size_t n_blocks = (n_paths + block_size - 1) / block_size;

    struct Block {
        std::vector<double> sum, sum_sq, max_abs;
        std::vector<std::size_t> alive;
        double residual = 0.0, cpty_jump = 0.0, bank_mismatch = 0.0, bank_jump = 0.0;
        std::size_t bank = 0, cpty = 0;
    };
    std::vector<Block> blocks(n_blocks);

    for_each_block(n_paths, block_size, threads, [&](std::size_t bi, std::size_t begin, std::size_t end) {
        Block& blk = blocks[bi];
        blk.sum.assign(n_nodes, 0.0);
        blk.sum_sq.assign(n_nodes, 0.0);
        blk.max_abs.assign(n_nodes, 0.0);
        blk.alive.assign(n_nodes, 0);
        for (std::size_t j = begin; j < end; ++j) {
            const LedgerPath lp = simulate_hedge(paths.path(j), mesh, curves, trade, margins, strategy, adjustment,
                                                 scenario, paths.seed(), j);
            for (std::size_t m = 0; m < lp.steps.size(); ++m) {
                const auto& st = lp.steps[m];
                blk.sum[m] += st.cumulative_leak;
                blk.sum_sq[m] += st.cumulative_leak * st.cumulative_leak;
                blk.max_abs[m] = std::max(blk.max_abs[m], std::abs(st.cumulative_leak));
                blk.alive[m] += 1;
                blk.residual = std::max(blk.residual, st.funding_residual / st.scale);
            }
            if (lp.event != DefaultEvent::none) {
                const double scale = lp.steps.back().scale;
                if (lp.event == DefaultEvent::bank) {
                    ++blk.bank;
                    blk.bank_mismatch = std::max(blk.bank_mismatch, std::abs(lp.default_jump - lp.expected_jump) / scale);
                    blk.bank_jump = std::max(blk.bank_jump, std::abs(lp.default_jump) / scale);
                } else {
                    ++blk.cpty;
                    blk.cpty_jump = std::max(blk.cpty_jump, std::abs(lp.default_jump) / scale);
                }
            }
        }
    });

    LeakStatistics stats;
    stats.time.assign(mesh.begin(), mesh.end());
    stats.mean_cumulative_leak.assign(n_nodes, 0.0);
    stats.rms_cumulative_leak.assign(n_nodes, 0.0);
    stats.max_abs_cumulative_leak.assign(n_nodes, 0.0);
    stats.alive.assign(n_nodes, 0);
    std::vector<double> sum(n_nodes, 0.0), sum_sq(n_nodes, 0.0);
    for (const Block& blk : blocks) {
        for (std::size_t m = 0; m < n_nodes; ++m) {
            sum[m] += blk.sum[m];
            sum_sq[m] += blk.sum_sq[m];
            stats.alive[m] += blk.alive[m];
            stats.max_abs_cumulative_leak[m] = std::max(stats.max_abs_cumulative_leak[m], blk.max_abs[m]);
        }
        stats.max_funding_residual = std::max(stats.max_funding_residual, blk.residual);
        stats.max_cpty_jump = std::max(stats.max_cpty_jump, blk.cpty_jump);
        stats.max_bank_jump_mismatch = std::max(stats.max_bank_jump_mismatch, blk.bank_mismatch);
        stats.max_bank_jump = std::max(stats.max_bank_jump, blk.bank_jump);
        stats.bank_defaults += blk.bank;
        stats.cpty_defaults += blk.cpty;
    }
    for (std::size_t m = 0; m < n_nodes; ++m) {
        if (stats.alive[m] == 0)
            continue;
        const double n = static_cast<double>(stats.alive[m]);
        stats.mean_cumulative_leak[m] = sum[m] / n;
        stats.rms_cumulative_leak[m] = std::sqrt(sum_sq[m] / n);
    }
    return stats;
}

} // namespace xva
