// errors.hpp — exception types thrown across the library. Each maps to one
// failure category surfaced at the CLI as a nonzero exit with the message.
#pragma once

#include <stdexcept>
#include <string>

namespace fca {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RenderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OcclusionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested an operation a component does not support, e.g. asking a
// black-box detector for input gradients.
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fca
