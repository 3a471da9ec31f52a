#pragma once

#include <stdexcept>
#include <string>

namespace wact {

// Base error for everything raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between tensors (reports both shapes in the message).
struct DimensionError : Error {
    using Error::Error;
};

// Input outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Invalid static configuration (rope axis split, schema violations, ...).
struct ConfigError : Error {
    using Error::Error;
};

// A caller broke an API contract (non-scalar loss, zero video tokens, ...).
struct ContractError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Malformed data records, unknown labels.
struct ValidationError : Error {
    using Error::Error;
};

// Request impossible to satisfy (draws > pool size, oracle pool too large).
struct RequestError : Error {
    using Error::Error;
};

// Non-finite loss or diverged optimization.
struct TrainingError : Error {
    using Error::Error;
};

} // namespace wact
