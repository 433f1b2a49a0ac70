#pragma once

#include <stdexcept>
#include <string>

namespace gbs {

// Base class for all library errors. The CLI maps each subclass to its own exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Exhaustive enumeration refused because it would exceed the configured cap.
class GuardExceeded : public Error {
public:
    using Error::Error;
};

// Post-selection never saw a state of the requested size within the budget.
class StarvationError : public Error {
public:
    using Error::Error;
};

// Inner perfect-matching sampler ran out of attempts and the policy is abort.
class InnerBudgetExhausted : public Error {
public:
    using Error::Error;
};

class OverflowError : public Error {
public:
    using Error::Error;
};

} // namespace gbs
