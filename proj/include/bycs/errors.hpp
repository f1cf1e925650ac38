#pragma once

#include <stdexcept>
#include <string>

namespace bycs {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data or configuration: malformed files, violated invariants,
/// out-of-range parameters. Maps to CLI exit code 1.
class validation_error : public error {
public:
    using error::error;
};

/// Failure of an inference backend: transport errors, replay misses,
/// cache conflicts that indicate a non-deterministic backend.
/// Maps to CLI exit code 2.
class backend_error : public error {
public:
    explicit backend_error(const std::string& what, int attempts = 0)
        : error(what), attempts_(attempts) {}

    int attempts() const { return attempts_; }

private:
    int attempts_ = 0;
};

} // namespace bycs
