#pragma once

#include <stdexcept>
#include <string>

namespace cimpact {

/// Base for all library errors. Maps to CLI exit code 3 unless a more
/// specific category applies.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Problems caused by the input data (bad CSV, unusable samples, missing
/// files). Maps to CLI exit code 2.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

// -- ingest --------------------------------------------------------------

class MissingColumn : public DataError {
public:
    explicit MissingColumn(const std::string& name)
        : DataError("missing required column: " + name) {}
};

class MalformedRow : public DataError {
public:
    using DataError::DataError;
};

class MalformedDate : public DataError {
public:
    explicit MalformedDate(const std::string& text)
        : DataError("unparseable date: '" + text + "'") {}
};

class MalformedDuration : public DataError {
public:
    explicit MalformedDuration(const std::string& text)
        : DataError("unparseable duration: '" + text + "'") {}
};

class NetworkError : public DataError {
public:
    using DataError::DataError;
};

class NonCsvResponse : public DataError {
public:
    using DataError::DataError;
};

// -- stats ---------------------------------------------------------------

class NonFiniteInput : public DataError {
public:
    using DataError::DataError;
};

/// Both samples have zero variance or fewer than two elements; the t-test
/// cannot be run and the complaint type cannot be screened.
class DegenerateSample : public DataError {
public:
    using DataError::DataError;
};

// -- features ------------------------------------------------------------

/// Eq. for the log ratio is undefined: no smoothing and a zero count.
class UndefinedRatio : public DataError {
public:
    using DataError::DataError;
};

class EmptyDataset : public DataError {
public:
    using DataError::DataError;
};

// -- models --------------------------------------------------------------

class InsufficientRows : public DataError {
public:
    using DataError::DataError;
};

class DimensionMismatch : public DataError {
public:
    using DataError::DataError;
};

// -- evaluate ------------------------------------------------------------

class ZeroVarianceTarget : public DataError {
public:
    explicit ZeroVarianceTarget()
        : DataError("target vector has zero variance; R^2 undefined") {}
};

class TooFewRows : public DataError {
public:
    using DataError::DataError;
};

// -- report --------------------------------------------------------------

class IncompleteGrid : public Error {
public:
    using Error::Error;
};

} // namespace cimpact
