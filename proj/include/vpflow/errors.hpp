#pragma once

#include <stdexcept>
#include <string>

namespace vp {

// Invalid specs, bad parameter combinations, unknown config keys. CLI exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Aborted runs (non-finite field, singular encounter). CLI exit 3.
struct RunAbort : std::runtime_error {
    explicit RunAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vp
