#pragma once

#include <stdexcept>
#include <string>

namespace subjgen {

// Contract violations: bad arguments, empty inputs, misaligned counts.
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes inside the compute graph.
struct shape_error : contract_error {
    using contract_error::contract_error;
};

// Non-finite values produced by a forward pass.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File reading/writing failures.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input records (corpus files, checkpoints).
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad config file or unusable config values.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace subjgen
