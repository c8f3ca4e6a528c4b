#pragma once

#include <stdexcept>
#include <string>

namespace condebate {

// Base class for all library errors so callers can catch the whole family.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string & msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not conform (mismatched axes, non-positive extents).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Non-finite input where finite values are required.
class NumericDomainError : public Error {
public:
    using Error::Error;
};

// Range list violates the RangeWeight invariants (bounds, order, overlap, weight).
class RangeValidationError : public Error {
public:
    using Error::Error;
};

// The range adjustment produced an unusable normalization denominator.
class DegenerateAdjustmentError : public Error {
public:
    DegenerateAdjustmentError(const std::string & msg, double original_sum, double new_sum)
        : Error(msg), original_sum(original_sum), new_sum(new_sum) {}

    double original_sum;
    double new_sum;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

// Sequence would exceed a model's maximum length.
class CapacityError : public Error {
public:
    using Error::Error;
};

// A backend was asked for something its capabilities rule out.
class UnsupportedFeatureError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// HTTP failure after retries; carries the last status (0 = no response).
class TransportError : public Error {
public:
    TransportError(const std::string & msg, int status) : Error(msg), status(status) {}

    int status;
};

// A vote had zero parseable answers.
class NoConsensusError : public Error {
public:
    using Error::Error;
};

// Internal bookkeeping broke an invariant (e.g. span coverage).
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace condebate
