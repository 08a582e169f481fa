#pragma once

#include <stdexcept>
#include <string>

namespace nshawkes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file content (bad geometry, unparseable row).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input is well formed but does not carry the expected fields.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Invalid hyperparameter or option value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise unusable numeric result.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A referenced input file does not exist or cannot be opened.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace nshawkes
