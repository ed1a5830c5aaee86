#pragma once

#include <stdexcept>
#include <string>

namespace ccp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Conformability violations (matmul on mismatched shapes, bad indices, ...).
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

/// A primitive produced NaN/Inf, or an operation was fed non-finite values.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what) {}
};

/// File format violations: bad magic, truncation, malformed text.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

/// Invalid configuration (unknown keys, inconsistent layer specs, ...).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace ccp
