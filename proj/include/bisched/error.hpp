#pragma once

#include <stdexcept>
#include <string>

namespace bisched {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scenario, problem or argument violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (scenario, CSV).
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace bisched
