#pragma once

#include <stdexcept>
#include <string>

namespace dasa {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoEvents : public Error {
public:
    NoEvents() : Error("dataset contains no observed events") {}
    explicit NoEvents(const std::string& what) : Error(what) {}
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class SeparationError : public Error {
public:
    using Error::Error;
};

class NoComparablePairs : public Error {
public:
    NoComparablePairs() : Error("no comparable pairs: c-index undefined") {}
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    explicit TrainingDiverged(int epoch)
        : Error("autoencoder training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

// Invalid user-supplied values: configs, treatment columns, record invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed or unreadable input files.
class DataError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

class EmptyPool : public Error {
public:
    EmptyPool() : Error("pool is empty") {}
};

class AllRunsFailed : public Error {
public:
    using Error::Error;
};

class OracleError : public Error {
public:
    using Error::Error;
};

class OracleTimeout : public OracleError {
public:
    using OracleError::OracleError;
};

class UnknownCandidate : public OracleError {
public:
    using OracleError::OracleError;
};

class InvariantViolation : public OracleError {
public:
    using OracleError::OracleError;
};

class MissingFeature : public OracleError {
public:
    using OracleError::OracleError;
};

}  // namespace dasa
