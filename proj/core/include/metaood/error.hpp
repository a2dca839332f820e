#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metaood {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Raised when an op produces NaN or Inf; the op name is part of the message.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error {
public:
    NotPositiveDefiniteError(std::size_t pivot, double value)
        : Error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                " = " + std::to_string(value)),
          pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace metaood
