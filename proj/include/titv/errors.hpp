// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by every titv module.
//
// Validation-style failures (bad shapes, bad configuration, malformed files,
// unknown identifiers) derive from ValidationError; the CLI maps them to exit
// status 2. Failures discovered while computing (non-finite gradients,
// non-deterministic objectives, I/O) derive from RuntimeFailure and map to 3.

#pragma once

#include <stdexcept>
#include <string>

namespace titv {

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Malformed, truncated, or wrong-version file content.
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class LookupError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IngestionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A metric is mathematically undefined for the given input (e.g. AUC on one class).
class UndefinedMetric : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NumericError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class DeterminismError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class IoError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

} // namespace titv
