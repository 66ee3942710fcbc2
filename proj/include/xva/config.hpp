#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "closeout.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "hedge_sim.hpp"
#include "market_model.hpp"
#include "xva_pde.hpp"

namespace xva {

enum class RunMode { corrected, legacy, both };

struct HedgeConfig {
    Measure measure = Measure::real_world;
    std::size_t paths = 10000;
    std::vector<std::size_t> steps{50, 100, 200, 400};  // nested refinements; each divides the largest
    DefaultScenario scenario;
    bool ledger_dump = false;  // per-step ledger of path 0 for the finest mesh

    friend bool operator==(const HedgeConfig&, const HedgeConfig&) = default;
};

struct EngineConfig {
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    std::size_t steps = 100;
    bool antithetic = false;
    std::size_t quadrature_stride = 1;
    double fca_tolerance = 0.0;
    int fca_max_iterations = 50;
    PdeGrid pde;
    bool pde_richardson = true;
    bool surface_csv = false;
    HedgeConfig hedge;

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/// One experiment: market, trade, margining, funding strategy and engine settings.
/// Rates, hazards, spreads and volatilities are per year; times are in years.
struct RunConfig {
    MarketCurves curves;
    double spot = 100.0;
    TradeSpec trade;
    MarginCapitalSpec margins;
    HedgeStrategy strategy;
    EngineConfig engine;
    RunMode mode = RunMode::corrected;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    void validate() const {
        curves.validate();
        trade.validate();
        margins.validate();
        strategy.validate(curves.recovery);
        require(spot > 0.0, "market.spot must be positive");
        require(engine.paths >= 1, "engine.paths must be at least 1");
        require(engine.steps >= 1, "engine.steps must be at least 1");
        require(engine.quadrature_stride >= 1 && engine.steps % engine.quadrature_stride == 0,
                "engine.quadrature_stride must divide engine.steps");
        require(engine.fca_max_iterations >= 1, "engine.fca_max_iterations must be at least 1");
        engine.pde.validate(spot, trade.strike);
        require(!engine.hedge.steps.empty(), "engine.hedge.steps must not be empty");
        const std::size_t finest = *std::max_element(engine.hedge.steps.begin(), engine.hedge.steps.end());
        for (std::size_t s : engine.hedge.steps)
            require(s >= 1 && finest % s == 0, "engine.hedge.steps must each divide the finest step count");
        require(engine.hedge.paths >= 1, "engine.hedge.paths must be at least 1");
    }
};

namespace config_detail {

using nlohmann::json;

inline const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw Error(ErrorKind::validation, "missing field " + where + "." + key);
    return j.at(key);
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return field(j, key, where).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, "bad field " + where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key))
        return fallback;
    return get<T>(j, key, where);
}

inline Curve curve_from_json(const json& j, const std::string& where) {
    if (j.is_number())
        return Curve(j.get<double>());
    if (j.is_object() && j.contains("times") && j.contains("values")) {
        try {
            return Curve(j.at("times").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::validation, "bad curve " + where + ": " + e.what());
        }
    }
    throw Error(ErrorKind::validation, "curve " + where + " must be a number or {times, values}");
}

inline json curve_to_json(const Curve& c) {
    if (c.times().size() == 1 && c.times().front() == 0.0)
        return c.values().front();
    return json{{"times", std::vector<double>(c.times().begin(), c.times().end())},
                {"values", std::vector<double>(c.values().begin(), c.values().end())}};
}

inline ProfileRule rule_from_json(const json& j, const std::string& where) {
    const auto rule = get<std::string>(j, "rule", where);
    const double v = get<double>(j, "value", where);
    if (rule == "constant")
        return ProfileRule::constant(v);
    if (rule == "proportional")
        return ProfileRule::proportional(v);
    throw Error(ErrorKind::validation, where + ".rule must be constant or proportional");
}

inline json rule_to_json(const ProfileRule& r) {
    return json{{"rule", r.kind == ProfileRule::Kind::constant ? "constant" : "proportional"}, {"value", r.value}};
}

inline PdeGrid grid_from_json(const json& j) {
    PdeGrid g;
    const std::string w = "engine.pde";
    g.space_intervals = get_or<std::size_t>(j, "space_intervals", g.space_intervals, w);
    g.time_steps = get_or<std::size_t>(j, "time_steps", g.time_steps, w);
    g.s_max = get_or<double>(j, "s_max", g.s_max, w);
    const auto spacing = get_or<std::string>(j, "spacing", "uniform", w);
    if (spacing == "uniform")
        g.spacing = Spacing::uniform;
    else if (spacing == "log")
        g.spacing = Spacing::log;
    else
        throw Error(ErrorKind::validation, "engine.pde.spacing must be uniform or log");
    g.theta = get_or<double>(j, "theta", g.theta, w);
    g.rannacher = get_or<bool>(j, "rannacher", g.rannacher, w);
    g.source_subcells = get_or<std::size_t>(j, "source_subcells", g.source_subcells, w);
    return g;
}

inline json grid_to_json(const PdeGrid& g) {
    return json{{"space_intervals", g.space_intervals}, {"time_steps", g.time_steps},
                {"s_max", g.s_max},
                {"spacing", g.spacing == Spacing::uniform ? "uniform" : "log"},
                {"theta", g.theta},
                {"rannacher", g.rannacher},
                {"source_subcells", g.source_subcells}};
}

inline DefaultScenario scenario_from_json(const json& j) {
    const std::string w = "engine.hedge.default";
    const auto kind = get<std::string>(j, "kind", w);
    if (kind == "none")
        return DefaultScenario::none();
    if (kind == "poisson")
        return DefaultScenario::poisson();
    if (kind == "bank")
        return DefaultScenario::bank(get<double>(j, "time", w));
    if (kind == "cpty")
        return DefaultScenario::cpty(get<double>(j, "time", w));
    throw Error(ErrorKind::validation, w + ".kind must be none, bank, cpty or poisson");
}

inline json scenario_to_json(const DefaultScenario& s) {
    switch (s.kind) {
    case DefaultScenario::Kind::none: return json{{"kind", "none"}};
    case DefaultScenario::Kind::poisson: return json{{"kind", "poisson"}};
    case DefaultScenario::Kind::bank: return json{{"kind", "bank"}, {"time", s.time}};
    case DefaultScenario::Kind::cpty: return json{{"kind", "cpty"}, {"time", s.time}};
    }
    return {};
}

inline const char* curve_keys[] = {"r",  "lambda_b", "lambda_c", "sigma", "gamma_s", "q_s",
                                   "q_c", "r_x",     "gamma_k",  "r_ib",  "r_ic",    "mu"};

template <class Curves>
auto& curve_slot(Curves& c, const std::string& key) {
    if (key == "r") return c.r;
    if (key == "lambda_b") return c.lambda_b;
    if (key == "lambda_c") return c.lambda_c;
    if (key == "sigma") return c.sigma;
    if (key == "gamma_s") return c.gamma_s;
    if (key == "q_s") return c.q_s;
    if (key == "q_c") return c.q_c;
    if (key == "r_x") return c.r_x;
    if (key == "gamma_k") return c.gamma_k;
    if (key == "r_ib") return c.r_ib;
    if (key == "r_ic") return c.r_ic;
    return c.mu;
}

} // namespace config_detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    using namespace config_detail;
    RunConfig cfg;

    const json& market = field(j, "market", "config");
    cfg.spot = get<double>(market, "spot", "market");
    const json& curves = field(market, "curves", "market");
    for (const char* key : curve_keys) {
        const std::string k = key;
        if (k == "r_ic" && !curves.contains("r_ic"))
            continue;
        curve_slot(cfg.curves, k) = curve_from_json(field(curves, key, "market.curves"), "market.curves." + k);
    }
    if (!curves.contains("r_ic"))
        cfg.curves.r_ic = cfg.curves.r_ib;
    const json& rec = field(market, "recovery", "market");
    cfg.curves.recovery = {get<double>(rec, "r1", "market.recovery"), get<double>(rec, "r2", "market.recovery"),
                           get<double>(rec, "rb", "market.recovery"), get<double>(rec, "rc", "market.recovery")};

    const json& trade = field(j, "trade", "config");
    const auto kind = get<std::string>(trade, "kind", "trade");
    if (kind == "forward")
        cfg.trade.kind = PayoffKind::forward;
    else if (kind == "european-call")
        cfg.trade.kind = PayoffKind::call;
    else if (kind == "european-put")
        cfg.trade.kind = PayoffKind::put;
    else
        throw Error(ErrorKind::validation, "trade.kind must be forward, european-call or european-put");
    cfg.trade.strike = get<double>(trade, "strike", "trade");
    cfg.trade.maturity = get<double>(trade, "maturity", "trade");
    cfg.trade.sign = get<int>(trade, "sign", "trade");

    const json& margins = field(j, "margins", "config");
    cfg.margins.vm_fraction = get<double>(margins, "vm_fraction", "margins");
    cfg.margins.ib = rule_from_json(field(margins, "ib", "margins"), "margins.ib");
    cfg.margins.ic = rule_from_json(field(margins, "ic", "margins"), "margins.ic");
    cfg.margins.capital = rule_from_json(field(margins, "capital", "margins"), "margins.capital");
    cfg.margins.phi = get<double>(margins, "phi", "margins");

    const json& strategy = field(j, "strategy", "config");
    const auto skind = get<std::string>(strategy, "kind", "strategy");
    if (skind == "zero-hedge-error")
        cfg.strategy = HedgeStrategy::zero_hedge_error();
    else if (skind == "single-bond")
        cfg.strategy = HedgeStrategy::single_bond(get_or<int>(strategy, "issued_bond", 2, "strategy"));
    else
        throw Error(ErrorKind::validation, "strategy.kind must be zero-hedge-error or single-bond");

    const json& engine = field(j, "engine", "config");
    auto& e = cfg.engine;
    e.seed = get<std::uint64_t>(engine, "seed", "engine");
    e.paths = get_or<std::size_t>(engine, "paths", e.paths, "engine");
    e.steps = get_or<std::size_t>(engine, "steps", e.steps, "engine");
    e.antithetic = get_or<bool>(engine, "antithetic", e.antithetic, "engine");
    e.quadrature_stride = get_or<std::size_t>(engine, "quadrature_stride", e.quadrature_stride, "engine");
    e.fca_tolerance = get_or<double>(engine, "fca_tolerance", e.fca_tolerance, "engine");
    e.fca_max_iterations = get_or<int>(engine, "fca_max_iterations", e.fca_max_iterations, "engine");
    e.pde_richardson = get_or<bool>(engine, "pde_richardson", e.pde_richardson, "engine");
    e.surface_csv = get_or<bool>(engine, "surface_csv", e.surface_csv, "engine");
    if (engine.contains("pde"))
        e.pde = grid_from_json(engine.at("pde"));
    if (engine.contains("hedge")) {
        const json& h = engine.at("hedge");
        const std::string w = "engine.hedge";
        const auto measure = get_or<std::string>(h, "measure", "real-world", w);
        if (measure == "real-world")
            e.hedge.measure = Measure::real_world;
        else if (measure == "pricing")
            e.hedge.measure = Measure::pricing;
        else
            throw Error(ErrorKind::validation, "engine.hedge.measure must be real-world or pricing");
        e.hedge.paths = get_or<std::size_t>(h, "paths", e.hedge.paths, w);
        e.hedge.steps = get_or<std::vector<std::size_t>>(h, "steps", e.hedge.steps, w);
        if (h.contains("default"))
            e.hedge.scenario = scenario_from_json(h.at("default"));
        e.hedge.ledger_dump = get_or<bool>(h, "ledger_dump", e.hedge.ledger_dump, w);
    }

    const auto mode = get_or<std::string>(j, "mode", "corrected", "config");
    if (mode == "corrected")
        cfg.mode = RunMode::corrected;
    else if (mode == "legacy")
        cfg.mode = RunMode::legacy;
    else if (mode == "both")
        cfg.mode = RunMode::both;
    else
        throw Error(ErrorKind::validation, "mode must be corrected, legacy or both");

    cfg.validate();
    return cfg;
}

/// Fully explicit form of a config; parses back to an identical RunConfig.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
    using namespace config_detail;
    json curves = json::object();
    for (const char* key : curve_keys)
        curves[key] = curve_to_json(curve_slot(cfg.curves, key));
    const auto& rec = cfg.curves.recovery;
    const auto& e = cfg.engine;
    json j;
    j["market"] = {{"spot", cfg.spot},
                   {"curves", curves},
                   {"recovery", {{"r1", rec.bond1}, {"r2", rec.bond2}, {"rb", rec.bank}, {"rc", rec.cpty}}}};
    j["trade"] = {{"kind", to_string(cfg.trade.kind)},
                  {"strike", cfg.trade.strike},
                  {"maturity", cfg.trade.maturity},
                  {"sign", cfg.trade.sign}};
    j["margins"] = {{"vm_fraction", cfg.margins.vm_fraction},
                    {"ib", rule_to_json(cfg.margins.ib)},
                    {"ic", rule_to_json(cfg.margins.ic)},
                    {"capital", rule_to_json(cfg.margins.capital)},
                    {"phi", cfg.margins.phi}};
    j["strategy"] = {{"kind", to_string(cfg.strategy.kind)}, {"issued_bond", cfg.strategy.issued_bond}};
    j["engine"] = {{"seed", e.seed},
                   {"paths", e.paths},
                   {"steps", e.steps},
                   {"antithetic", e.antithetic},
                   {"quadrature_stride", e.quadrature_stride},
                   {"fca_tolerance", e.fca_tolerance},
                   {"fca_max_iterations", e.fca_max_iterations},
                   {"pde_richardson", e.pde_richardson},
                   {"surface_csv", e.surface_csv},
                   {"pde", grid_to_json(e.pde)},
                   {"hedge",
                    {{"measure", to_string(e.hedge.measure)},
                     {"paths", e.hedge.paths},
                     {"steps", e.hedge.steps},
                     {"default", scenario_to_json(e.hedge.scenario)},
                     {"ledger_dump", e.hedge.ledger_dump}}}};
    j["mode"] = cfg.mode == RunMode::corrected ? "corrected" : cfg.mode == RunMode::legacy ? "legacy" : "both";
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::validation, "cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

} // namespace xva
