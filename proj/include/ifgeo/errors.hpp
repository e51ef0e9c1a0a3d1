#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ifgeo {

/// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// llm-gateway

/// Network failure or 5xx/429 after all retries were spent.
class TransportError : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

/// Provider answered, but with something that is not a usable completion.
class BackendRefusal : public Error {
public:
    using Error::Error;
};

/// No structured payload could be located in the raw completion text.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A payload was found but does not match the stage schema.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// pipeline

class EmptyQuerySet : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ProvenanceError : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class TruncationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// engine-sim

class UnknownQuery : public Error {
public:
    using Error::Error;
};

// stability-metrics

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class UnknownKind : public Error {
public:
    using Error::Error;
};

// bench-runner

class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

class MissingArtifact : public Error {
public:
    using Error::Error;
};

}  // namespace ifgeo
