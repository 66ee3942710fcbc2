#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "curve.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace xva {

struct Recoveries {
    double bond1 = 0.0;  // R_1, subordinated bank bond
    double bond2 = 0.0;  // R_2, senior bank bond
    double bank = 0.0;   // R_B, derivative close-out on bank default
    double cpty = 0.0;   // R_C, derivative close-out on counterparty default

    friend bool operator==(const Recoveries&, const Recoveries&) = default;
};

/// Deterministic market term structures. All rates and hazards are per year.
struct MarketCurves {
    Curve r;         // risk-free short rate
    Curve lambda_b;  // bank hazard rate
    Curve lambda_c;  // counterparty hazard rate
    Curve sigma;     // volatility of S
    Curve gamma_s;   // dividend yield
    Curve q_s;       // stock repo rate (haircut-adjusted)
    Curve q_c;       // counterparty bond repo rate
    Curve r_x;       // interest paid on variation margin
    Curve gamma_k;   // cost of capital
    Curve r_ib;      // return on posted initial margin
    Curve r_ic;      // legacy-only: rate on received initial margin
    Curve mu;        // real-world drift, hedge simulation only
    Recoveries recovery;

    friend bool operator==(const MarketCurves&, const MarketCurves&) = default;

    void validate() const {
        auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
        require(unit(recovery.bond1) && unit(recovery.bond2) && unit(recovery.bank) && unit(recovery.cpty),
                "recoveries must lie in [0,1]");
        require(lambda_b.min_value() >= 0.0, "lambda_b must be non-negative");
        require(lambda_c.min_value() >= 0.0, "lambda_c must be non-negative");
        require(sigma.min_value() >= 0.0, "sigma must be non-negative");
    }
};

struct BondYields {
    double r1;
    double r2;
    double rc;
};

inline BondYields bond_yields(const MarketCurves& c, double t) {
    const double r = c.r(t);
    const double lb = c.lambda_b(t);
    return {r + (1.0 - c.recovery.bond1) * lb, r + (1.0 - c.recovery.bond2) * lb, r + c.lambda_c(t)};
}

/// exp(-int_t^u (r + lambda_b + lambda_c) dv)
inline double discount_factor(const MarketCurves& c, double t, double u) {
    if (u < t)
        throw Error(ErrorKind::validation, "discount_factor: u < t");
    return std::exp(-(c.r.integral(t, u) + c.lambda_b.integral(t, u) + c.lambda_c.integral(t, u)));
}

enum class Measure { pricing, real_world };

inline const char* to_string(Measure m) { return m == Measure::pricing ? "pricing" : "real-world"; }

/// Simulated asset paths on a shared time mesh, stored path-major.
class PathGrid {
  public:
    PathGrid() = default;
    PathGrid(std::vector<double> mesh, std::size_t n_paths, std::uint64_t seed, Measure measure)
        : mesh_(std::move(mesh)), n_paths_(n_paths), seed_(seed), measure_(measure),
          values_(n_paths * mesh_.size()) {}

    std::span<const double> mesh() const { return mesh_; }
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_nodes() const { return mesh_.size(); }
    std::uint64_t seed() const { return seed_; }
    Measure measure() const { return measure_; }

    double operator()(std::size_t path, std::size_t node) const { return values_[path * mesh_.size() + node]; }
    std::span<const double> path(std::size_t j) const { return {values_.data() + j * mesh_.size(), mesh_.size()}; }
    std::span<double> path(std::size_t j) { return {values_.data() + j * mesh_.size(), mesh_.size()}; }
    std::span<const double> data() const { return values_; }

    /// Every `stride`-th node; exact for GBM since stepping is exact.
    PathGrid subsample(std::size_t stride) const {
        require(stride >= 1 && (mesh_.size() - 1) % stride == 0, "subsample stride must divide the step count");
        std::vector<double> mesh;
        for (std::size_t m = 0; m < mesh_.size(); m += stride)
            mesh.push_back(mesh_[m]);
        PathGrid out(std::move(mesh), n_paths_, seed_, measure_);
        for (std::size_t j = 0; j < n_paths_; ++j) {
            auto src = path(j);
            auto dst = out.path(j);
            for (std::size_t m = 0; m < dst.size(); ++m)
                dst[m] = src[m * stride];
        }
        return out;
    }

    friend bool operator==(const PathGrid&, const PathGrid&) = default;

  private:
    std::vector<double> mesh_;
    std::size_t n_paths_ = 0;
    std::uint64_t seed_ = 0;
    Measure measure_ = Measure::pricing;
    std::vector<double> values_;
};

inline std::vector<double> uniform_mesh(double t0, double t1, std::size_t steps) {
    require(steps >= 1 && t1 > t0, "uniform_mesh needs t1 > t0 and at least one step");
    std::vector<double> mesh(steps + 1);
    for (std::size_t m = 0; m <= steps; ++m)
        mesh[m] = t0 + (t1 - t0) * static_cast<double>(m) / static_cast<double>(steps);
    mesh.back() = t1;
    return mesh;
}

/// Independent generator for stream `index` of a run seeded with `seed`.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t index, std::uint64_t domain = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(domain)};
    return std::mt19937_64(seq);
}

struct PathOptions {
    bool antithetic = false;
    unsigned threads = 1;
};

/// Exact log-Euler GBM paths. Drift is q_S - gamma_S under the pricing measure and
/// mu under the real-world measure. Path j draws from stream j (or j/2 with
/// antithetics, odd paths negating the shocks).
inline PathGrid simulate_paths(const MarketCurves& curves, double s0, std::vector<double> mesh, std::size_t n_paths,
                               std::uint64_t seed, Measure measure, PathOptions options = {}) {
    require(s0 > 0.0, "simulate_paths: S_0 must be positive");
    require(n_paths >= 1, "simulate_paths: need at least one path");
    require(mesh.size() >= 2, "simulate_paths: mesh needs at least two nodes");
    for (std::size_t m = 1; m < mesh.size(); ++m)
        require(mesh[m] > mesh[m - 1], "simulate_paths: mesh must be strictly increasing");

    const std::size_t steps = mesh.size() - 1;
    std::vector<double> log_drift(steps), vol(steps);
    for (std::size_t m = 0; m < steps; ++m) {
        const double a = mesh[m], b = mesh[m + 1];
        const double var = curves.sigma.integral_of_square(a, b);
        const double drift = measure == Measure::pricing ? curves.q_s.integral(a, b) - curves.gamma_s.integral(a, b)
                                                         : curves.mu.integral(a, b);
        log_drift[m] = drift - 0.5 * var;
        vol[m] = std::sqrt(var);
    }

    PathGrid grid(std::move(mesh), n_paths, seed, measure);
    const double log_s0 = std::log(s0);
    for_each_block(n_paths, 256, options.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const bool flip = options.antithetic && (j % 2 == 1);
            auto engine = stream_engine(seed, options.antithetic ? j / 2 : j);
            std::normal_distribution<double> normal;
            auto out = grid.path(j);
            double x = log_s0;
            out[0] = s0;
            for (std::size_t m = 0; m < steps; ++m) {
                const double z = normal(engine);
                x += log_drift[m] + vol[m] * (flip ? -z : z);
                out[m + 1] = std::exp(x);
            }
        }
    });
    return grid;
}

} // namespace xva
