#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fdsim {

// Root of every error the library raises. The CLI maps ConfigError to exit
// code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error { using Error::Error; };
class InvalidParameter : public Error { using Error::Error; };
class UnsupportedOrder : public Error { using Error::Error; };
class InsufficientSamples : public Error { using Error::Error; };
class InvalidGrid : public Error { using Error::Error; };
class CoverageError : public Error { using Error::Error; };
class CalibrationError : public Error { using Error::Error; };
class EstimationError : public Error { using Error::Error; };
class InvalidComparison : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

// Raised for malformed text input. line() is 1-based; 0 means the problem
// is not tied to a single line (for example a missing header).
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A profile file whose frequency column is not strictly increasing.
class NonMonotoneGrid : public ParseError { using ParseError::ParseError; };

// A failure inside a sweep, tagged with the (scheme, value, trial) that hit it.
class SweepError : public Error { using Error::Error; };

}  // namespace fdsim
