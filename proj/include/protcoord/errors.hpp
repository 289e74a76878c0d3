#pragma once

#include <stdexcept>
#include <string>

namespace protcoord {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, networks, arguments).
class InputError : public Error {
public:
    using Error::Error;
};

/// An operation was called with its documented precondition violated.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Query referring to a node, lateral, device or location that does not exist.
class QueryError : public Error {
public:
    using Error::Error;
};

/// Load flow failed (voltage collapse below the divergence floor).
class DivergenceError : public Error {
public:
    DivergenceError(std::string node, const std::string& what)
        : Error(what), node_(std::move(node)) {}
    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

/// Target time lies outside what a curve can produce.
class UnreachableTimeError : public Error {
public:
    using Error::Error;
};

/// A current sweep is coarser than the configured coordination resolution.
class SweepGapError : public Error {
public:
    using Error::Error;
};

}  // namespace protcoord
