#pragma once

#include <stdexcept>
#include <string>

namespace clodgs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable PLY / JSON / image file.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration, precondition or argument.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Rendering failure (non-finite inputs, buffer mismatch).
class RenderError : public Error {
public:
    using Error::Error;
};

/// Optimization diverged.
class TrainError : public Error {
public:
    using Error::Error;
};

}  // namespace clodgs
