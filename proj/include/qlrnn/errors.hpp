#pragma once

#include <stdexcept>
#include <string>

namespace qlrnn {

// Dimension mismatch in a linear-algebra or cell operation.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad run configuration (unknown key, invalid value). CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or malformed dataset. CLI exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value where the computation cannot continue. CLI exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qlrnn
