#pragma once

#include <stdexcept>
#include <string>

namespace ergodic {

/// Argument outside the mathematical domain of an operation (non-finite
/// input, bet fraction outside [0,1], wrong logarithm branch, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A checked exponential or accumulated value left the representable range.
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

/// Not enough informative data to build an estimate.
class EmptySampleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation at a pole of a closed-form expression.
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration (bad field value, unknown key, wrong preset).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw ConfigError(message);
}

} // namespace detail
} // namespace ergodic
