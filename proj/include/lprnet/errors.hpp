#pragma once

#include <stdexcept>
#include <string>

namespace lprnet {

// I/O failure (missing file, short read, unwritable path).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input; carries the 1-based line number.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, long line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    long line_number;
};

// File is structurally valid but not a layout we accept.
struct UnsupportedFormatError : std::runtime_error {
    explicit UnsupportedFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint with an unknown magic or format version.
struct UnsupportedVersionError : std::runtime_error {
    explicit UnsupportedVersionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or truncated binary record; message names the record.
struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape mismatch; message names both shapes.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A feature map produced a non-finite value.
struct FeatureFault : std::runtime_error {
    explicit FeatureFault(const std::string& msg) : std::runtime_error(msg) {}
};

// A forward or backward op produced NaN/Inf; message names the op.
struct NumericFault : std::runtime_error {
    explicit NumericFault(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric has no defined value for the given inputs.
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lprnet
