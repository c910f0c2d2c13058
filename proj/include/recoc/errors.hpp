#pragma once

#include <stdexcept>

namespace recoc {

// Error taxonomy. The CLI maps these onto its exit codes; library code just
// lets them propagate.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };  // shape/index mismatches
struct DomainError    : Error { using Error::Error; };  // numeric argument out of range
struct FormatError    : Error { using Error::Error; };  // file parsing
struct TrainingError  : Error { using Error::Error; };
struct ProtocolError  : Error { using Error::Error; };  // query-protocol violations
struct ConfigError    : Error { using Error::Error; };
struct IoError        : Error { using Error::Error; };

}  // namespace recoc
