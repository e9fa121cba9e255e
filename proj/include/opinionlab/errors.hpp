#pragma once

#include <stdexcept>
#include <string>

namespace opinionlab {

enum class Errc {
    non_positive_parameter,
    domain_error,
    dimension_mismatch,
    invalid_argument,
    invalid_function,
    invalid_topology,
    step_size_underflow,
    budget_exceeded,
    isolated_agent,
    monotonicity_violation,
    degenerate_equilibria,
};

inline const char* to_string(Errc code) noexcept {
    switch (code) {
    case Errc::non_positive_parameter: return "NonPositiveParameter";
    case Errc::domain_error: return "DomainError";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::invalid_function: return "InvalidFunction";
    case Errc::invalid_topology: return "InvalidTopology";
    case Errc::step_size_underflow: return "StepSizeUnderflow";
    case Errc::budget_exceeded: return "BudgetExceeded";
    case Errc::isolated_agent: return "IsolatedAgent";
    case Errc::monotonicity_violation: return "MonotonicityViolation";
    case Errc::degenerate_equilibria: return "DegenerateEquilibria";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace opinionlab
