#pragma once

#include <stdexcept>
#include <string>

namespace fracwave {

/// Input outside the mathematical domain of an operation.
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Structured input failed a declared invariant; `key` names the offending field.
struct validation_error : std::invalid_argument {
    std::string key;
    validation_error(std::string key_, const std::string& what_)
        : std::invalid_argument(key_ + ": " + what_), key(std::move(key_)) {}
};

/// A numerical method could not reach the requested tolerance.
/// `estimate` carries the method's own error estimate at the point of failure.
struct accuracy_error : std::runtime_error {
    double estimate;
    accuracy_error(const std::string& what_, double estimate_)
        : std::runtime_error(what_), estimate(estimate_) {}
};

/// An iterative solver exhausted its iteration budget.
struct convergence_error : std::runtime_error {
    double last_residual;
    int iterations;
    convergence_error(const std::string& what_, double residual_, int iters_)
        : std::runtime_error(what_), last_residual(residual_), iterations(iters_) {}
};

}  // namespace fracwave
