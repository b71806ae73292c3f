#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace amip {

// Broad failure classes. The CLI maps Usage/Schema/Config/Bounds to exit
// code 2 and everything else to exit code 1.
enum class ErrorKind {
    Schema,
    Parse,
    Config,
    Bounds,
    DegenerateDesign,
    InsufficientData,
    DegenerateSubset,
    WeakInstrument,
    SingularJacobian,
    SolverFailure,
    MissingGradient,
    AlphaTooSmall,
    EnumerationTooLarge,
    Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // True for mistakes in the caller's inputs rather than numerical trouble.
    bool is_usage_error() const noexcept;

private:
    ErrorKind kind_;
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& msg) : Error(ErrorKind::Schema, msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t row, std::string column)
        : Error(ErrorKind::Parse, msg), row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

class BoundsError : public Error {
public:
    explicit BoundsError(const std::string& msg) : Error(ErrorKind::Bounds, msg) {}
};

class DegenerateDesignError : public Error {
public:
    explicit DegenerateDesignError(const std::string& msg)
        : Error(ErrorKind::DegenerateDesign, msg) {}
};

class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& msg)
        : Error(ErrorKind::InsufficientData, msg) {}
};

// The reweighted design lost identifiability (e.g. a drop set removed every
// observation carrying a dummy).
class DegenerateSubsetError : public Error {
public:
    explicit DegenerateSubsetError(const std::string& msg)
        : Error(ErrorKind::DegenerateSubset, msg) {}
};

class WeakInstrumentError : public Error {
public:
    explicit WeakInstrumentError(const std::string& msg)
        : Error(ErrorKind::WeakInstrument, msg) {}
};

class SingularJacobianError : public Error {
public:
    explicit SingularJacobianError(const std::string& msg)
        : Error(ErrorKind::SingularJacobian, msg) {}
};

class MissingGradientError : public Error {
public:
    explicit MissingGradientError(const std::string& msg)
        : Error(ErrorKind::MissingGradient, msg) {}
};

class AlphaTooSmallError : public Error {
public:
    explicit AlphaTooSmallError(const std::string& msg)
        : Error(ErrorKind::AlphaTooSmall, msg) {}
};

class EnumerationTooLargeError : public Error {
public:
    explicit EnumerationTooLargeError(const std::string& msg)
        : Error(ErrorKind::EnumerationTooLarge, msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

}  // namespace amip
