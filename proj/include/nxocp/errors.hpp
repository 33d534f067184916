#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace nxocp {

/// Invalid user-supplied parameters (bad rectangle, unsupported degree, ...).
class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Interface geometry that the discretization cannot represent.
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An API was called on an object it does not apply to.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Internal data structures disagree with each other.
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Linear solver failure. Carries the last relative residual.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + format_residual(residual) + ")"),
          residual_(residual) {}

    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    static std::string format_residual(double r) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3e", r);
        return buf;
    }

    double residual_;
};

}  // namespace nxocp
