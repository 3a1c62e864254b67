#pragma once

#include <stdexcept>
#include <string>

namespace chunkrag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem or encoding problem while reading inputs.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed structured input (JSON line, index file, model output).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Index file written by an incompatible format version.
class VersionMismatchError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Mismatched vector dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Caller violated an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Failure talking to a remote or scripted model backend.
class BackendError : public Error {
public:
    using Error::Error;
};

/// The remote service rejected the credentials (HTTP 401/403).
class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace chunkrag
