#pragma once

#include <stdexcept>
#include <string>

namespace raildelay {

// Error taxonomy; the CLI maps each class to a distinct exit code
// (see FORMATS.md).

// Malformed input: CSV/JSON/config syntax, bad column layout, unparsable
// numbers or timestamps.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed input that violates a data contract (invariant breaches,
// insufficient date ranges, empty cohorts).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No weather sample exists for a required (hour, grid) lookup.
class MissingWeatherError : public DataError {
public:
    using DataError::DataError;
};

// An optimizer failed to reach its gradient tolerance.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The likelihood cannot identify a parameter (collinear covariates,
// unobserved transitions, singular information).
class IdentifiabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace raildelay
