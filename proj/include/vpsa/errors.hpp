#pragma once

#include <stdexcept>
#include <string>

namespace vpsa {

// Invalid configuration, spec mismatch, contract violation. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A particle coordinate became non-finite or left the guard box. CLI exit code 3.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// File read/write failure. CLI exit code 4.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Witness was generated under different (config, functional) parameters.
struct WitnessMismatchError : ConfigError {
    explicit WitnessMismatchError(const std::string& what) : ConfigError(what) {}
};

}  // namespace vpsa
