#pragma once

#include <stdexcept>
#include <string>

namespace pulseforge {

// Bad inputs, contract violations, malformed files. CLI maps these to exit 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Blow-ups inside numerical routines (non-finite values, failed projections).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Reduction could not hit the requested output arity.
class ReductionError : public ValidationError {
public:
    ReductionError(const std::string& what, int achievable_outputs)
        : ValidationError(what), achievable(achievable_outputs) {}
    int achievable;
};

}  // namespace pulseforge
