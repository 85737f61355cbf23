#pragma once

#include <stdexcept>
#include <string>

namespace cotic {

// Error taxonomy shared by all modules. Everything user-facing derives from
// Error so callers (and the CLI exit-code mapping) can handle failures by
// category.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Value outside an operation's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// API precondition violated (programming error rather than bad data).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed, inconsistent, or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value or unknown key.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Artifact failed an integrity check (checksum, truncation, schema).
class IntegrityError : public Error {
public:
    using Error::Error;
};

}  // namespace cotic
