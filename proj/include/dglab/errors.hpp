#pragma once

#include <stdexcept>
#include <string>

namespace dglab {

// Base type for everything the library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller handed in data that violates a documented precondition
// (mass not summing to one, mismatched dimensions, bad weights, ...).
struct InvalidInputError : Error {
    using Error::Error;
};

// A contract between cooperating calls was broken, e.g. a forward cache
// replayed against a network with different shapes.
struct ContractViolation : Error {
    using Error::Error;
};

// An enumeration or search would exceed its configured size cap.
struct ResourceLimitError : Error {
    using Error::Error;
};

// Training produced a non-finite loss, gradient, or parameter.
struct TrainingDivergenceError : Error {
    TrainingDivergenceError(const std::string& what, int epoch_at_failure)
        : Error(what), epoch(epoch_at_failure) {}

    int epoch = -1;
};

// A candidate-set search ended up with nothing to minimize over.
struct DegenerateObjectError : Error {
    using Error::Error;
};

// Malformed config, fixture, dataset, or manifest file.
struct ParseError : Error {
    using Error::Error;
};

}  // namespace dglab
