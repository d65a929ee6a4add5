#pragma once

#include <stdexcept>
#include <string>

namespace strata {

/// Base for every error the engine raises. CLI exit codes are derived from
/// the concrete subclass.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Structural problem with an input record or file (column count, truncation).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A field could not be parsed as a number.
class ParseError : public FormatError {
public:
    ParseError(const std::string& what, std::size_t column)
        : FormatError(what), column_(column) {}
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// Numerically invalid data (non-finite samples and the like).
class DataError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Operation not valid in the current state of a state machine or session.
class StateError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class CompatibilityError : public Error {
public:
    using Error::Error;
};

}  // namespace strata
