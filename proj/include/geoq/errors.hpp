#pragma once

#include <stdexcept>
#include <string>

namespace geoq {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input admits no unique geometric object (coincident points, collinear sets, ...).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

/// A mesh element makes cotangent weights or spherical triangles ill-defined.
class DegenerateMesh : public Error {
public:
    using Error::Error;
};

/// Point location failed; only possible when an embedding has folded triangles.
class NotFound : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

}  // namespace geoq
