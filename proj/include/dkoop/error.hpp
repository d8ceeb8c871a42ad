#pragma once

#include <stdexcept>
#include <string>

namespace dkoop {

// Violated call contract (bad sizes, invalid ranges, index out of range).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Value outside the mathematical domain of an operation (sqrt of a negative level).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Singular systems, non-finite values, solver non-convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or incompatible files and documents.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw PreconditionError(what);
}

}  // namespace detail
}  // namespace dkoop
