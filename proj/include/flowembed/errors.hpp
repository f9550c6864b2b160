#pragma once

#include <stdexcept>
#include <string>

namespace flowembed {

// CSV header does not match the expected schema.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A data row failed to parse or violates a field invariant.
struct RowError : std::runtime_error {
    size_t line;
    RowError(size_t line_, const std::string& what_)
        : std::runtime_error("line " + std::to_string(line_) + ": " + what_), line(line_) {}
};

// Input file contains no records.
struct EmptyDatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid hyperparameter or incompatible configuration between artifacts.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/matrix dimension mismatch.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Corrupt or unrecognized artifact file.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Recognized artifact written by an incompatible format version.
struct VersionError : FormatError {
    using FormatError::FormatError;
};

// Metric is undefined for the given input (single cluster, no positives, ...).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Normalization of an all-zero vector.
struct ZeroVectorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A non-finite value appeared in a numeric computation.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace flowembed
