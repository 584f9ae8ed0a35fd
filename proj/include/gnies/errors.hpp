#pragma once

#include <stdexcept>
#include <string>

namespace gnies {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or configuration (ranges, sizes, malformed graph input).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Malformed or inconsistent data (CSV parsing, empty environments).
class DataError : public Error {
public:
    using Error::Error;
};

/// Errors raised by the structure search machinery.
class SolverError : public Error {
public:
    using Error::Error;
};

class NoConsistentExtension : public SolverError {
public:
    using SolverError::SolverError;
};

class PreconditionViolated : public SolverError {
public:
    using SolverError::SolverError;
};

class InvalidClassRepresentation : public SolverError {
public:
    using SolverError::SolverError;
};

/// Class enumeration exceeded its configured member cap.
class ClassOverflow : public SolverError {
public:
    using SolverError::SolverError;
};

class SingularSystem : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace gnies
