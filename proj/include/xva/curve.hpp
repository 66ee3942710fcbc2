#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "error.hpp"

namespace xva {

/// Right-continuous piecewise-constant function of time.
///
/// `values[k]` applies on [times[k], times[k+1]); the first value extends to the
/// left of `times[0]` and the last one to +infinity. Integrals are exact.
class Curve {
  public:
    Curve() : Curve(0.0) {}
    Curve(double constant) : times_{0.0}, values_{constant} {}
    Curve(std::vector<double> times, std::vector<double> values)
        : times_(std::move(times)), values_(std::move(values)) {
        require(!times_.empty(), "curve needs at least one node");
        require(times_.size() == values_.size(), "curve times/values size mismatch");
        for (std::size_t k = 1; k < times_.size(); ++k)
            require(times_[k] > times_[k - 1], "curve times must be strictly increasing");
        for (double v : values_)
            require(std::isfinite(v), "curve values must be finite");
    }

    double operator()(double t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin())
            return values_.front();
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    /// Exact integral over [a, b]; negative when b < a.
    double integral(double a, double b) const {
        if (b < a)
            return -integral(b, a);
        double total = 0.0;
        double lo = a;
        while (lo < b) {
            auto it = std::upper_bound(times_.begin(), times_.end(), lo);
            double hi = it == times_.end() ? b : std::min(b, *it);
            total += (*this)(lo) * (hi - lo);
            lo = hi;
        }
        return total;
    }

    /// Exact integral of the squared curve over [a, b], b >= a.
    double integral_of_square(double a, double b) const {
        double total = 0.0;
        double lo = a;
        while (lo < b) {
            auto it = std::upper_bound(times_.begin(), times_.end(), lo);
            double hi = it == times_.end() ? b : std::min(b, *it);
            const double v = (*this)(lo);
            total += v * v * (hi - lo);
            lo = hi;
        }
        return total;
    }

    bool is_constant() const {
        return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
    }
    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }

    std::span<const double> times() const { return times_; }
    std::span<const double> values() const { return values_; }

    friend bool operator==(const Curve&, const Curve&) = default;

  private:
    std::vector<double> times_;
    std::vector<double> values_;
};

inline Curve operator+(const Curve& a, const Curve& b) {
    std::vector<double> times(a.times().begin(), a.times().end());
    times.insert(times.end(), b.times().begin(), b.times().end());
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<double> values;
    values.reserve(times.size());
    for (double t : times)
        values.push_back(a(t) + b(t));
    return Curve(std::move(times), std::move(values));
}

/// True when both curves evaluate identically everywhere.
inline bool equivalent(const Curve& a, const Curve& b) {
    auto agree_on = [&](std::span<const double> ts) {
        return std::all_of(ts.begin(), ts.end(), [&](double t) { return a(t) == b(t); });
    };
    return a.values().front() == b.values().front() && agree_on(a.times()) && agree_on(b.times());
}

} // namespace xva
