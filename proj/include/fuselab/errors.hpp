#pragma once

#include <stdexcept>
#include <string>

namespace fuselab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data (bad magic, truncation, shape mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed file with a version this build cannot read.
class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Invalid caller-supplied data (empty sets, out-of-range classes).
class InputError : public Error {
public:
    using Error::Error;
};

/// Dataset-level consistency violation such as duplicate ids.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Objective returned a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, int batch, const std::string& what)
        : Error(what), epoch_(epoch), batch_(batch) {}

    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

private:
    int epoch_;
    int batch_;
};

}  // namespace fuselab
