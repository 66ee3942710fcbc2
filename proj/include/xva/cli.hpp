#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "error.hpp"
#include "hedge_sim.hpp"
#include "market_model.hpp"
#include "xva_mc.hpp"
#include "xva_pde.hpp"

namespace xva::cli {

using nlohmann::json;

enum ExitCode : int { success = 0, validation_failure = 2, numerical_failure = 3 };

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::strategy_unsolvable: return validation_failure;
    case ErrorKind::non_convergence:
    case ErrorKind::numerical: return numerical_failure;
    }
    return numerical_failure;
}

/// Lossless decimal form of a double for CSV output.
inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header) : out_(file) {
        if (!out_)
            throw Error(ErrorKind::validation, "cannot write " + file.string());
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

  private:
    std::ofstream out_;
};

inline void write_json(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file);
    if (!out)
        throw Error(ErrorKind::validation, "cannot write " + file.string());
    out << j.dump(2) << '\n';
}

inline json terms_to_json(const XvaTerms& t) {
    json j = json::object();
    const auto v = t.as_array();
    for (std::size_t i = 0; i < v.size(); ++i)
        j[XvaTerms::names[i]] = v[i];
    return j;
}

inline json breakdown_to_json(const XvaBreakdown& b) {
    return json{{"mode", to_string(b.mode)},
                {"strategy", to_string(b.strategy.kind)},
                {"n_paths", b.n_paths},
                {"terms", terms_to_json(b.value)},
                {"std_errors", terms_to_json(b.std_error)},
                {"total", b.total},
                {"total_std_error", b.total_std_error},
                {"fca_iterations", b.iterations},
                {"iteration_trace", b.iteration_trace}};
}

inline void write_profile_csv(const std::filesystem::path& file, const ExposureProfile& p) {
    CsvWriter csv(file, {"t", "discount", "cva_exposure", "dva_exposure", "fca_exposure", "vm", "capital", "ib",
                         "ic", "u_profile"});
    for (std::size_t k = 0; k < p.time.size(); ++k)
        csv.row({num(p.time[k]), num(p.discount[k]), num(p.cva_exposure[k]), num(p.dva_exposure[k]),
                 num(p.fca_exposure[k]), num(p.vm[k]), num(p.capital[k]), num(p.ib[k]), num(p.ic[k]),
                 num(p.u[k])});
}

inline PathGrid pricing_paths(const RunConfig& cfg, unsigned threads) {
    const auto& e = cfg.engine;
    return simulate_paths(cfg.curves, cfg.spot, uniform_mesh(0.0, cfg.trade.maturity, e.steps), e.paths, e.seed,
                          Measure::pricing, {e.antithetic, threads});
}

inline McSettings mc_settings(const RunConfig& cfg, unsigned threads) {
    McSettings s;
    s.quadrature_stride = cfg.engine.quadrature_stride;
    s.fca_tolerance = cfg.engine.fca_tolerance;
    s.fca_max_iterations = cfg.engine.fca_max_iterations;
    s.threads = threads;
    return s;
}

struct PdeRun {
    PdeSolution solution;
    std::optional<RichardsonEstimate> richardson;
};

inline PdeRun run_pde_engine(const RunConfig& cfg, bool keep_surface) {
    PdeGrid grid = cfg.engine.pde;
    grid.keep_surface = keep_surface;
    PdeRun run;
    if (cfg.engine.pde_richardson) {
        PdeGrid coarse = grid;
        coarse.keep_surface = false;
        const double u_coarse = solve_pde(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, coarse, cfg.spot).value;
        run.solution = solve_pde(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, grid.refined(), cfg.spot);
        run.richardson = richardson(u_coarse, run.solution.value);
    } else {
        run.solution = solve_pde(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, grid, cfg.spot);
    }
    return run;
}

inline void command_mc(const RunConfig& cfg, const std::filesystem::path& out, unsigned threads) {
    const PathGrid paths = pricing_paths(cfg, threads);
    const McSettings settings = mc_settings(cfg, threads);
    json results = json::array();
    auto emit = [&](const XvaBreakdown& b) {
        results.push_back(breakdown_to_json(b));
        write_profile_csv(out / (std::string("exposure_profile_") + to_string(b.mode) + ".csv"), b.profile);
    };
    if (cfg.mode != RunMode::legacy)
        emit(compute_xva(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, paths, settings));
    if (cfg.mode != RunMode::corrected)
        emit(compute_xva_legacy(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, paths, settings));
    write_json(out / "xva_breakdown.json",
               json{{"command", "mc"}, {"results", results}, {"effective_config", config_to_json(cfg)}});
}

inline void command_pde(const RunConfig& cfg, const std::filesystem::path& out) {
    const PdeRun run = run_pde_engine(cfg, cfg.engine.surface_csv);
    json j{{"command", "pde"}, {"u0", run.solution.value}, {"effective_config", config_to_json(cfg)}};
    if (run.richardson) {
        const auto& r = *run.richardson;
        j["richardson"] = {{"coarse", r.coarse}, {"fine", r.fine}, {"extrapolated", r.extrapolated}, {"error", r.error}};
    }
    write_json(out / "pde_result.json", j);
    if (cfg.engine.surface_csv) {
        const auto& s = run.solution;
        CsvWriter csv(out / "pde_surface.csv", {"t", "S", "U"});
        for (std::size_t m = 0; m < s.t.size(); ++m)
            for (std::size_t i = 0; i < s.s.size(); ++i)
                csv.row({num(s.t[m]), num(s.s[i]), num(s.surface[m * s.s.size() + i])});
    }
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct HedgeRun {
    std::vector<std::size_t> steps;
    std::vector<LeakStatistics> stats;
    double mean_leak_order = 0.0;
    double rms_leak_order = 0.0;
};

/// Ledger simulation on nested meshes sharing one set of fine paths.
inline HedgeRun run_hedge_engine(const RunConfig& cfg, const PdeSolution& surface, unsigned threads) {
    const auto& h = cfg.engine.hedge;
    std::vector<std::size_t> steps = h.steps;
    std::sort(steps.begin(), steps.end());
    const std::size_t finest = steps.back();
    const PathGrid fine = simulate_paths(cfg.curves, cfg.spot, uniform_mesh(0.0, cfg.trade.maturity, finest), h.paths,
                                         cfg.engine.seed, h.measure, {false, threads});
    HedgeRun run;
    run.steps = steps;
    std::vector<double> dt, mean_metric, rms_metric;
    for (std::size_t s : steps) {
        const PathGrid p = fine.subsample(finest / s);
        run.stats.push_back(
            simulate_hedge_batch(p, cfg.curves, cfg.trade, cfg.margins, cfg.strategy, surface, h.scenario, threads));
        dt.push_back(cfg.trade.maturity / static_cast<double>(s));
        mean_metric.push_back(run.stats.back().mean_leak_metric());
        rms_metric.push_back(run.stats.back().rms_leak_metric());
    }
    if (steps.size() >= 2) {
        run.mean_leak_order = log_log_slope(dt, mean_metric);
        run.rms_leak_order = log_log_slope(dt, rms_metric);
    }
    return run;
}

inline void command_hedge(const RunConfig& cfg, const std::filesystem::path& out, unsigned threads) {
    PdeGrid grid = cfg.engine.pde;
    grid.keep_surface = true;
    const PdeSolution surface = solve_pde(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, grid, cfg.spot);
    const HedgeRun run = run_hedge_engine(cfg, surface, threads);

    {
        CsvWriter csv(out / "leak_convergence.csv",
                      {"steps", "dt", "max_abs_mean_cumulative_leak", "max_rms_cumulative_leak",
                       "max_funding_residual", "max_cpty_jump", "max_bank_jump_mismatch", "bank_defaults",
                       "cpty_defaults"});
        for (std::size_t i = 0; i < run.steps.size(); ++i) {
            const auto& s = run.stats[i];
            csv.row({std::to_string(run.steps[i]), num(cfg.trade.maturity / static_cast<double>(run.steps[i])),
                     num(s.mean_leak_metric()), num(s.rms_leak_metric()), num(s.max_funding_residual),
                     num(s.max_cpty_jump), num(s.max_bank_jump_mismatch), std::to_string(s.bank_defaults),
                     std::to_string(s.cpty_defaults)});
        }
    }
    {
        const auto& s = run.stats.back();
        CsvWriter csv(out / "leak_stats.csv",
                      {"t", "alive", "mean_cumulative_leak", "rms_cumulative_leak", "max_abs_cumulative_leak"});
        for (std::size_t m = 0; m < s.time.size(); ++m)
            csv.row({num(s.time[m]), std::to_string(s.alive[m]), num(s.mean_cumulative_leak[m]),
                     num(s.rms_cumulative_leak[m]), num(s.max_abs_cumulative_leak[m])});
    }
    write_json(out / "hedge_summary.json", json{{"command", "hedge"},
                                                {"u0_pde", surface.value},
                                                {"mean_leak_order", run.mean_leak_order},
                                                {"rms_leak_order", run.rms_leak_order},
                                                {"effective_config", config_to_json(cfg)}});

    if (cfg.engine.hedge.ledger_dump) {
        const std::size_t finest = run.steps.back();
        const PathGrid p = simulate_paths(cfg.curves, cfg.spot, uniform_mesh(0.0, cfg.trade.maturity, finest), 1,
                                          cfg.engine.seed, cfg.engine.hedge.measure);
        const LedgerPath lp = simulate_hedge(p.path(0), p.mesh(), cfg.curves, cfg.trade, cfg.margins, cfg.strategy,
                                             surface, cfg.engine.hedge.scenario, cfg.engine.seed, 0);
        CsvWriter csv(out / "ledger_path0.csv",
                      {"t", "S", "V", "U", "V_hat", "delta", "alpha_c", "alpha_1", "alpha_2", "beta_s", "beta_c",
                       "beta_x", "beta_k", "beta_ib", "portfolio", "eps_h", "funding_residual", "leak",
                       "cumulative_leak"});
        for (const auto& st : lp.steps) {
            const auto& h = st.hedge;
            csv.row({num(st.t), num(st.S), num(st.v), num(st.u), num(st.v_hat), num(h.delta), num(h.alpha_c),
                     num(h.alpha_1), num(h.alpha_2), num(h.beta_s), num(h.beta_c), num(h.beta_x), num(h.beta_k),
                     num(h.beta_ib), num(st.portfolio), num(h.eps_h), num(st.funding_residual), num(st.leak),
                     num(st.cumulative_leak)});
        }
    }
}

inline void command_compare(const RunConfig& cfg, const std::filesystem::path& out, unsigned threads) {
    const PathGrid paths = pricing_paths(cfg, threads);
    const McSettings settings = mc_settings(cfg, threads);
    const XvaBreakdown corrected = compute_xva(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, paths, settings);
    const XvaBreakdown legacy = compute_xva_legacy(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, paths, settings);

    const auto c = corrected.value.as_array(), l = legacy.value.as_array();
    const auto cs = corrected.std_error.as_array(), ls = legacy.std_error.as_array();
    json rows = json::array();
    CsvWriter csv(out / "compare.csv", {"term", "corrected", "legacy", "delta", "corrected_se", "legacy_se"});
    for (std::size_t i = 0; i < c.size(); ++i) {
        csv.row({XvaTerms::names[i], num(c[i]), num(l[i]), num(l[i] - c[i]), num(cs[i]), num(ls[i])});
        rows.push_back({{"term", XvaTerms::names[i]}, {"corrected", c[i]}, {"legacy", l[i]}, {"delta", l[i] - c[i]}});
    }
    csv.row({"total", num(corrected.total), num(legacy.total), num(legacy.total - corrected.total),
             num(corrected.total_std_error), num(legacy.total_std_error)});
    rows.push_back({{"term", "total"},
                    {"corrected", corrected.total},
                    {"legacy", legacy.total},
                    {"delta", legacy.total - corrected.total}});
    write_json(out / "compare.json", json{{"command", "compare"},
                                          {"delta_table", rows},
                                          {"corrected", breakdown_to_json(corrected)},
                                          {"legacy", breakdown_to_json(legacy)},
                                          {"effective_config", config_to_json(cfg)}});
}

struct Options {
    std::string command;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

/// Runs one command; failures become an error record on stderr and in
/// `<out>/error.json`, and the matching exit code.
inline int run(const Options& opt, std::ostream& err = std::cerr) {
    const std::filesystem::path out(opt.out_dir);
    auto fail = [&](const char* kind, const std::string& message, int code, const std::vector<double>& trace) {
        const json record{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}, {"trace", trace}}}};
        err << record.dump() << '\n';
        std::error_code ec;
        std::filesystem::create_directories(out, ec);
        if (!ec) {
            std::ofstream f(out / "error.json");
            f << record.dump(2) << '\n';
        }
        return code;
    };
    try {
        RunConfig cfg = load_config(opt.config_path);
        if (opt.seed)
            cfg.engine.seed = *opt.seed;
        std::filesystem::create_directories(out);
        if (opt.command == "mc")
            command_mc(cfg, out, opt.threads);
        else if (opt.command == "pde")
            command_pde(cfg, out);
        else if (opt.command == "hedge")
            command_hedge(cfg, out, opt.threads);
        else if (opt.command == "compare")
            command_compare(cfg, out, opt.threads);
        else
            throw Error(ErrorKind::validation, "unknown command " + opt.command);
        return success;
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what(), exit_code_for(e.kind()), e.trace());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("validation", e.what(), validation_failure, {});
    }
}

} // namespace xva::cli
