#pragma once

#include <stdexcept>
#include <string>

namespace addt {

// Error taxonomy maps onto the CLI exit-code contract:
//   ConfigError     -> exit 1 (usage / configuration)
//   ValidationError -> exit 2 (data / contract violation)
//   NumericError    -> exit 3 (numerical fault during computation)

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace addt
