#pragma once

#include <stdexcept>
#include <string>

namespace enor {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical procedure could not produce a valid result (singular system,
/// failed bracket, non-finite state).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An explicit time integration produced a non-finite value.
class SolverDivergence : public NumericalError {
public:
    SolverDivergence(int point, int step)
        : NumericalError("nonlocal solver diverged at point " + std::to_string(point) +
                         ", step " + std::to_string(step)),
          point_(point), step_(step) {}

    int point() const noexcept { return point_; }
    int step() const noexcept { return step_; }

private:
    int point_;
    int step_;
};

/// Malformed or missing files.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace enor
