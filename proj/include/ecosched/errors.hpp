#pragma once

#include <stdexcept>
#include <string>

namespace ecosched {

// File missing / unreadable / unwritable.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed record in an input file; message carries file name and line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent or incomplete configuration (missing profile entry, bad horizon, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside an operation's stated domain (frequency out of range, t before series start).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative solver produced a non-finite iterate.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Internal consistency check failed; indicates a bug, not bad input.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace ecosched
