#pragma once

#include <stdexcept>
#include <string>

namespace landkit {

// Base for every error thrown by the library. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem-level failures: unreadable, unwritable, truncated mid-read.
class IoError : public Error {
public:
    using Error::Error;
};

// Structurally broken or unsupported file content (bad magic, exotic TIFF layout,
// version mismatch in model containers).
class FormatError : public Error {
public:
    using Error::Error;
};

// Pixel window or coordinate outside the raster grid.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Mismatched grid/vector dimensions between two inputs.
class ShapeError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class BandNotFound : public Error {
public:
    using Error::Error;
};

class NameCollision : public Error {
public:
    using Error::Error;
};

class MissingClassError : public Error {
public:
    using Error::Error;
};

// Same pixel labeled with two different classes.
class ConflictError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Training labels collapse to a single class.
class DegenerateLabelsError : public Error {
public:
    using Error::Error;
};

// Loss went non-finite during training; carries the offending epoch.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch)
        : Error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

}  // namespace landkit
