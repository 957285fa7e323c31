#pragma once

#include <stdexcept>
#include <string>

namespace covkit {

/// Base class for all covkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (bad CSV, duplicate dates,
/// degenerate columns, empty filter results, file format mismatches).
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (eigensolver non-convergence, singular systems,
/// eigenvalues below the admissible floor).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Requested windows do not fit the available sample range, or a
/// bootstrap draw could not be satisfied within the retry cap.
class InfeasibleWindowError : public Error {
public:
    using Error::Error;
};

} // namespace covkit
