#pragma once

#include <stdexcept>
#include <string>

namespace lswap {

// Error taxonomy mirrors the process exit codes: config/contract problems,
// numerical aborts, and I/O failures are kept distinct so the boundary layer
// can map them without string matching.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SpaceError : std::runtime_error {
    explicit SpaceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lswap
