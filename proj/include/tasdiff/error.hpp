#pragma once

#include <stdexcept>
#include <string>

namespace tasdiff {

// Shape or dimension mismatch between operands.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid configuration value (even window, bad threshold ordering, ...).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Non-finite data where finite values are required.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content; carries the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset = 0;
};

}  // namespace tasdiff
