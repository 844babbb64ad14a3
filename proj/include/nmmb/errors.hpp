#pragma once

#include <stdexcept>
#include <string>

namespace nmmb {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument to an operation (out-of-domain point, dimension mismatch, ...).
class domain_error : public error {
public:
    using error::error;
};

/// Invalid or inconsistent configuration (mesh misfit, bad config key, ...).
class config_error : public error {
public:
    using error::error;
};

/// A resource guard was exceeded (mode cap, particle number, tensor dimension).
class resource_error : public error {
public:
    using error::error;
};

/// An internal numerical invariant failed (e.g. mass matrix not SPD).
class internal_error : public error {
public:
    using error::error;
};

/// Spectral cutoff too low to represent a state faithfully.
class cutoff_error : public error {
public:
    using error::error;
};

/// File I/O failure.
class io_error : public error {
public:
    using error::error;
};

} // namespace nmmb
