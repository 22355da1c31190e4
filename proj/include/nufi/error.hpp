#pragma once

#include <stdexcept>
#include <string>

namespace nufi {

/// Contract violation by the caller (bad index, out-of-order append, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid configuration text or values. Carries the offending line when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// NaN/Inf or a diverging sub-solver.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace nufi
