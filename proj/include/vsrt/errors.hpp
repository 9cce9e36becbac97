#pragma once

#include <stdexcept>
#include <string>

namespace vsrt {

// Error taxonomy shared by the library and the CLI exit-code mapping.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct GraphError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct UnsupportedError : Error {
    using Error::Error;
};

struct ResourceError : Error {
    using Error::Error;
};

} // namespace vsrt
