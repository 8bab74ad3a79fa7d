#pragma once

#include <stdexcept>
#include <string>

namespace crformer {

// Shape or size of an argument does not fit the operation.
struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A value violates a documented precondition (non-binary mask, non-scalar loss, ...).
struct ContractError : std::invalid_argument {
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid architecture or run configuration.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// File could not be read, written or decoded.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint header or layout does not match what this build writes.
struct VersionError : std::runtime_error {
    explicit VersionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training loss became non-finite; carries the diagnostic dump.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crformer
