#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xva {

enum class ErrorKind { validation, strategy_unsolvable, non_convergence, numerical };

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::strategy_unsolvable: return "strategy_unsolvable";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what, std::vector<double> trace = {})
        : std::runtime_error(what), kind_(kind), trace_(std::move(trace)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Per-iteration diagnostics (e.g. max-abs change of a fixed point); may be empty.
    const std::vector<double>& trace() const noexcept { return trace_; }

  private:
    ErrorKind kind_;
    std::vector<double> trace_;
};

inline void require(bool condition, const std::string& message) {
    if (!condition)
        throw Error(ErrorKind::validation, message);
}

} // namespace xva
