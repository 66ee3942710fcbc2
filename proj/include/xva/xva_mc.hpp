#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "closeout.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "market_model.hpp"
#include "parallel.hpp"

namespace xva {

enum class XvaMode { corrected, legacy };

inline const char* to_string(XvaMode m) { return m == XvaMode::corrected ? "corrected" : "legacy"; }

struct XvaTerms {
    double cva = 0.0;
    double dva = 0.0;
    double fca = 0.0;
    double colva = 0.0;
    double kva = 0.0;
    double mva = 0.0;

    static constexpr std::array<const char*, 6> names{"cva", "dva", "fca", "colva", "kva", "mva"};

    double sum() const { return cva + dva + fca + colva + kva + mva; }
    std::array<double, 6> as_array() const { return {cva, dva, fca, colva, kva, mva}; }
};

/// Per-node expectations along the quadrature mesh, all at the converged
/// (corrected) U profile.
struct ExposureProfile {
    std::vector<double> time;
    std::vector<double> discount;       // D(t_0, u)
    std::vector<double> cva_exposure;   // E[(V - X - I_C)^+]
    std::vector<double> dva_exposure;   // E[(V - X + I_B)^-]
    std::vector<double> fca_exposure;   // E[g_B + R_1 A_1 + R_2 A_2]
    std::vector<double> vm;             // E[X]
    std::vector<double> capital;        // E[K]
    std::vector<double> ib;             // E[I_B]
    std::vector<double> ic;             // E[I_C]
    std::vector<double> u;              // E[U(u, S_u)]
};

struct XvaBreakdown {
    XvaMode mode = XvaMode::corrected;
    HedgeStrategy strategy;
    XvaTerms value;
    XvaTerms std_error;
    double total = 0.0;  // value.sum()
    double total_std_error = 0.0;
    std::size_t n_paths = 0;
    int iterations = 0;
    std::vector<double> iteration_trace;  // max-abs change of the U profile per Picard sweep
    ExposureProfile profile;
};

struct McSettings {
    std::size_t quadrature_stride = 1;  // quadrature nodes are every k-th path node
    double fca_tolerance = 0.0;         // <= 0: 1e-8 * max(S_0, strike, 1)
    int fca_max_iterations = 50;
    unsigned threads = 1;
    std::vector<double> initial_u_profile;  // optional Picard start, one value per quadrature node
};

/// Expected adjustment profile m(u) = E_t0[U(u, S_u)] on a node set, defined by
/// m(u_i) = int_{u_i}^T D(u_i, v) (base(v) + feedback(v) m(v)) dv.
///
/// The FCA integrand references V_hat = V + U through the own-bond holdings; that
/// dependence is affine, so only the expectation of U along the paths is needed.
struct UProfileSystem {
    std::vector<double> time;
    std::vector<double> cum_rate;  // int_{t_0}^{u} (r + lambda_B + lambda_C)
    std::vector<double> base;
    std::vector<double> feedback;

    bool u_free() const {
        return std::all_of(feedback.begin(), feedback.end(), [](double c) { return c == 0.0; });
    }

    /// Trapezoidal evaluation of the right-hand side for a given profile.
    std::vector<double> apply(const std::vector<double>& m) const {
        const std::size_t n = time.size();
        std::vector<double> src(n), out(n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            src[k] = base[k] + feedback[k] * m[k];
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double acc = 0.0;
            for (std::size_t k = i; k + 1 < n; ++k) {
                const double h = 0.5 * (time[k + 1] - time[k]);
                acc += h * (std::exp(cum_rate[i] - cum_rate[k]) * src[k] +
                            std::exp(cum_rate[i] - cum_rate[k + 1]) * src[k + 1]);
            }
            out[i] = acc;
        }
        return out;
    }
};

struct FixedPointResult {
    std::vector<double> profile;
    int iterations = 0;
    std::vector<double> trace;  // max-abs change per sweep
};

/// Picard iteration on the U profile. Stops when the max-abs change is within
/// `tolerance`; a U-free system is exact after one sweep.
inline FixedPointResult fca_fixed_point(const UProfileSystem& system, std::vector<double> initial,
                                        int max_iterations, double tolerance) {
    const std::size_t n = system.time.size();
    require(system.cum_rate.size() == n && system.base.size() == n && system.feedback.size() == n,
            "fca_fixed_point: inconsistent system sizes");
    require(max_iterations >= 1, "fca_fixed_point: need at least one iteration");
    if (initial.empty())
        initial.assign(n, 0.0);
    require(initial.size() == n, "fca_fixed_point: initial profile must have one value per node");

    FixedPointResult r;
    r.profile = std::move(initial);
    const bool u_free = system.u_free();
    for (int it = 1;; ++it) {
        std::vector<double> next = system.apply(r.profile);
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            change = std::max(change, std::abs(next[k] - r.profile[k]));
        r.trace.push_back(change);
        r.profile = std::move(next);
        if (u_free || change <= tolerance) {
            r.iterations = it;
            return r;
        }
        if (it >= max_iterations)
            throw Error(ErrorKind::non_convergence,
                        "FCA fixed point did not converge within " + std::to_string(max_iterations) + " iterations",
                        r.trace);
    }
}

namespace detail {

// per-path integrated functionals
enum PathTerm : std::size_t { p_cva, p_dva, p_fca0, p_colva, p_kva_k, p_mva, p_mva_ic, p_count };
// per-node expectations
enum NodeTerm : std::size_t { n_cva, n_dva, n_fca0, n_x, n_k, n_ib, n_ic, n_count };

struct NodeData {
    std::vector<double> time, weight, cum_rate, discount;
    std::vector<double> lambda_b, lambda_c, s_x, s_k, s_ib, s_ic;
    std::vector<Carry> carry;
    std::vector<std::size_t> path_index;
};

inline NodeData quadrature_nodes(const MarketCurves& c, const TradeSpec& trade, const PathGrid& paths,
                                 std::size_t stride) {
    const auto mesh = paths.mesh();
    require(stride >= 1 && (mesh.size() - 1) % stride == 0, "quadrature stride must divide the path step count");
    require(std::abs(mesh.back() - trade.maturity) <= 1e-12 * std::max(1.0, trade.maturity),
            "path mesh must end at the trade maturity");
    NodeData d;
    const double t0 = mesh.front();
    for (std::size_t m = 0; m < mesh.size(); m += stride) {
        const double u = mesh[m];
        d.path_index.push_back(m);
        d.time.push_back(u);
        d.cum_rate.push_back(c.r.integral(t0, u) + c.lambda_b.integral(t0, u) + c.lambda_c.integral(t0, u));
        d.discount.push_back(std::exp(-d.cum_rate.back()));
        const double r = c.r(u), lb = c.lambda_b(u);
        d.lambda_b.push_back(lb);
        d.lambda_c.push_back(c.lambda_c(u));
        d.s_x.push_back(c.r_x(u) - r - lb);
        d.s_k.push_back(c.gamma_k(u) - r - lb);
        d.s_ib.push_back(c.r_ib(u) - r - lb);
        d.s_ic.push_back(c.r_ic(u) - r - lb);
        d.carry.push_back(carry(c, u, trade.maturity));
    }
    const std::size_t n = d.time.size();
    d.weight.assign(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double h = 0.5 * (d.time[k + 1] - d.time[k]);
        d.weight[k] += h;
        d.weight[k + 1] += h;
    }
    return d;
}

inline double sample_std_error(const std::vector<double>& x, double mean) {
    const std::size_t n = x.size();
    if (n < 2)
        return 0.0;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i)
        sq[i] = (x[i] - mean) * (x[i] - mean);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1) / static_cast<double>(n));
}

inline XvaBreakdown run_xva(const MarketCurves& curves, const TradeSpec& trade, const MarginCapitalSpec& margins,
                            const HedgeStrategy& strategy, const PathGrid& paths, const McSettings& settings,
                            XvaMode mode) {
    curves.validate();
    trade.validate();
    margins.validate();
    strategy.validate(curves.recovery);
    require(paths.measure() == Measure::pricing, "XVA integrals need pricing-measure paths");
    require(equivalent(curves.q_c, curves.r), "the XVA engine requires q_C == r");
    require(paths.n_paths() >= 1, "no paths");

    const NodeData d = quadrature_nodes(curves, trade, paths, settings.quadrature_stride);
    const std::size_t n_nodes = d.time.size();
    const std::size_t n_paths = paths.n_paths();
    const auto& rec = curves.recovery;
    const double phi = margins.phi;
    const double u_coeff = bank_default_funding_term(0.0, {0.0, 0.0, 0.0, 0.0}, phi, rec, strategy).u_coeff;

    constexpr std::size_t block_size = 512;
    const std::size_t n_blocks = (n_paths + block_size - 1) / block_size;
    std::vector<std::array<double, p_count>> per_path(n_paths);
    std::vector<double> block_sums(n_blocks * n_nodes * n_count, 0.0);

    for_each_block(n_paths, block_size, settings.threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
        double* sums = block_sums.data() + b * n_nodes * n_count;
        for (std::size_t j = begin; j < end; ++j) {
            const auto path = paths.path(j);
            std::array<double, p_count> acc{};
            for (std::size_t k = 0; k < n_nodes; ++k) {
                const double S = path[d.path_index[k]];
                const double V = value_and_delta(trade, d.carry[k], S).value;
                const Profiles p = profiles(margins, V);
                const double e_cva = positive_part(V - p.X - p.ic);
                const double e_dva = negative_part(V - p.X + p.ib);
                const double e_fca = bank_default_funding_term(V, p, phi, rec, strategy).constant;

                double* s = sums + k * n_count;
                s[n_cva] += e_cva;
                s[n_dva] += e_dva;
                s[n_fca0] += e_fca;
                s[n_x] += p.X;
                s[n_k] += p.K;
                s[n_ib] += p.ib;
                s[n_ic] += p.ic;

                const double wd = d.weight[k] * d.discount[k];
                acc[p_cva] += wd * (-(1.0 - rec.cpty) * d.lambda_c[k] * e_cva);
                acc[p_dva] += wd * (-(1.0 - rec.bank) * d.lambda_b[k] * e_dva);
                acc[p_fca0] += wd * (-d.lambda_b[k] * e_fca);
                acc[p_colva] += wd * (-d.s_x[k] * p.X);
                acc[p_kva_k] += wd * (-d.s_k[k] * p.K);
                acc[p_mva] += wd * (d.s_ib[k] * p.ib);
                acc[p_mva_ic] += wd * (-d.s_ic[k] * p.ic);
            }
            per_path[j] = acc;
        }
    });

    std::vector<std::array<double, n_count>> node_mean(n_nodes);
    for (std::size_t k = 0; k < n_nodes; ++k)
        for (std::size_t f = 0; f < n_count; ++f) {
            double s = 0.0;
            for (std::size_t b = 0; b < n_blocks; ++b)
                s += block_sums[(b * n_nodes + k) * n_count + f];
            node_mean[k][f] = s / static_cast<double>(n_paths);
        }

    std::array<double, p_count> mean{}, se{};
    std::vector<double> column(n_paths);
    for (std::size_t f = 0; f < p_count; ++f) {
        for (std::size_t j = 0; j < n_paths; ++j)
            column[j] = per_path[j][f];
        mean[f] = pairwise_sum(column) / static_cast<double>(n_paths);
        se[f] = sample_std_error(column, mean[f]);
    }

    const bool legacy = mode == XvaMode::legacy;
    const double kva_scale = legacy ? 1.0 : phi;

    // Expected integrand of the corrected adjustment, split as s0 + feedback * U. The
    // legacy mode shares this profile so that its FCA is unchanged.
    std::vector<double> s0(n_nodes), feedback(n_nodes);
    for (std::size_t k = 0; k < n_nodes; ++k) {
        const auto& e = node_mean[k];
        s0[k] = -(1.0 - rec.cpty) * d.lambda_c[k] * e[n_cva] - (1.0 - rec.bank) * d.lambda_b[k] * e[n_dva] -
                d.lambda_b[k] * e[n_fca0] - d.s_x[k] * e[n_x] - phi * d.s_k[k] * e[n_k] + d.s_ib[k] * e[n_ib];
        feedback[k] = -d.lambda_b[k] * u_coeff;
    }

    double tolerance = settings.fca_tolerance;
    if (tolerance <= 0.0)
        tolerance = 1e-8 * std::max({paths(0, 0), trade.strike, 1.0});

    UProfileSystem system{d.time, d.cum_rate, s0, feedback};
    FixedPointResult fp = fca_fixed_point(system, settings.initial_u_profile, settings.fca_max_iterations, tolerance);
    const std::vector<double>& u = fp.profile;

    XvaBreakdown out;
    out.iterations = fp.iterations;
    out.iteration_trace = std::move(fp.trace);

    double fca_feedback = 0.0;
    for (std::size_t k = 0; k < n_nodes; ++k)
        fca_feedback += d.weight[k] * d.discount[k] * (-d.lambda_b[k] * u_coeff * u[k]);

    out.mode = mode;
    out.strategy = strategy;
    out.n_paths = n_paths;
    out.value.cva = mean[p_cva];
    out.value.dva = mean[p_dva];
    out.value.fca = mean[p_fca0] + fca_feedback;
    out.value.colva = mean[p_colva];
    out.value.kva = kva_scale * mean[p_kva_k];
    out.value.mva = legacy ? mean[p_mva] + mean[p_mva_ic] : mean[p_mva];
    out.std_error.cva = se[p_cva];
    out.std_error.dva = se[p_dva];
    out.std_error.fca = se[p_fca0];
    out.std_error.colva = se[p_colva];
    out.std_error.kva = kva_scale * se[p_kva_k];
    if (legacy) {
        for (std::size_t j = 0; j < n_paths; ++j)
            column[j] = per_path[j][p_mva] + per_path[j][p_mva_ic];
        out.std_error.mva = sample_std_error(column, pairwise_sum(column) / static_cast<double>(n_paths));
    } else {
        out.std_error.mva = se[p_mva];
    }
    out.total = out.value.sum();

    for (std::size_t j = 0; j < n_paths; ++j) {
        const auto& a = per_path[j];
        column[j] = a[p_cva] + a[p_dva] + a[p_fca0] + a[p_colva] + kva_scale * a[p_kva_k] + a[p_mva] +
                    (legacy ? a[p_mva_ic] : 0.0);
    }
    out.total_std_error = sample_std_error(column, pairwise_sum(column) / static_cast<double>(n_paths));

    auto& prof = out.profile;
    prof.time = d.time;
    prof.discount = d.discount;
    prof.u = u;
    for (std::size_t k = 0; k < n_nodes; ++k) {
        const auto& e = node_mean[k];
        prof.cva_exposure.push_back(e[n_cva]);
        prof.dva_exposure.push_back(e[n_dva]);
        prof.fca_exposure.push_back(e[n_fca0] + u_coeff * u[k]);
        prof.vm.push_back(e[n_x]);
        prof.capital.push_back(e[n_k]);
        prof.ib.push_back(e[n_ib]);
        prof.ic.push_back(e[n_ic]);
    }
    return out;
}

} // namespace detail

/// Feynman-Kac estimate of the six adjustments on a shared pricing-measure path set.
inline XvaBreakdown compute_xva(const MarketCurves& curves, const TradeSpec& trade, const MarginCapitalSpec& margins,
                                const HedgeStrategy& strategy, const PathGrid& paths, const McSettings& settings = {}) {
    return detail::run_xva(curves, trade, margins, strategy, paths, settings, XvaMode::corrected);
}

/// Same estimate with the uncorrected capital and initial-margin terms: KVA on
/// E[K] rather than E[phi K], and an extra received-margin term in MVA.
inline XvaBreakdown compute_xva_legacy(const MarketCurves& curves, const TradeSpec& trade,
                                       const MarginCapitalSpec& margins, const HedgeStrategy& strategy,
                                       const PathGrid& paths, const McSettings& settings = {}) {
    return detail::run_xva(curves, trade, margins, strategy, paths, settings, XvaMode::legacy);
}

} // namespace xva
