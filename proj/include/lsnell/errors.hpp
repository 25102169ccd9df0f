#pragma once
#include <stdexcept>
#include <string>

namespace lsnell {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed user input (files, config values). The CLI maps this to exit code 2.
struct InputError : Error {
    using Error::Error;
};

struct TreeError : InputError {
    using InputError::InputError;
};

struct MeasureError : InputError {
    using InputError::InputError;
};

struct PolicyError : InputError {
    using InputError::InputError;
};

// Internal solver trouble (iteration caps, infeasibility). CLI maps to exit 1.
struct SolverError : Error {
    using Error::Error;
};

struct GirsanovError : Error {
    using Error::Error;
};

// Conditioning on a node the measure assigns zero mass. Carries the node id so
// the caller can decide what to do (rethrow, or switch to the value-0 convention).
struct NullNodeError : Error {
    int level;
    int node;
    NullNodeError(int level_, int node_)
        : Error("conditioning on null node at level " + std::to_string(level_) +
                ", node " + std::to_string(node_)),
          level(level_), node(node_) {}
};

} // namespace lsnell
