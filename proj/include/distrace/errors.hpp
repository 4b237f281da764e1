#pragma once

#include <stdexcept>
#include <string>

namespace distrace {

/// Bad usage, unreadable config, unknown template names. CLI exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid corpus records, parse failures, fidelity violations. Exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Transport failures, provider error payloads, exhausted retries. Exit code 3.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace distrace
