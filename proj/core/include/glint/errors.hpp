#pragma once

#include <stdexcept>
#include <string>

namespace glint {

/// Broad failure classes. The CLI maps each one onto a process exit code.
enum class ErrorKind {
    Validation,  // bad input data or configuration
    Io,          // filesystem / codec failure
    Transport,   // model or evaluator endpoint unreachable, timed out
    Protocol,    // endpoint answered but the reply is unusable
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message)
        : Error(ErrorKind::Validation, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::Io, message) {}
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& message)
        : Error(ErrorKind::Transport, message) {}
};

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& message)
        : Error(ErrorKind::Protocol, message) {}
};

}  // namespace glint
