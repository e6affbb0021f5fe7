#pragma once

#include <stdexcept>
#include <string>

namespace netfense {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   ConfigError -> 2, data-shaped errors -> 3, NumericError -> 4.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public DataError {
public:
    ParseError(const std::string& file, long line, const std::string& msg)
        : DataError(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

class ShapeError : public DataError {
public:
    explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

class StateError : public DataError {
public:
    explicit StateError(const std::string& msg) : DataError(msg) {}
};

class IoError : public DataError {
public:
    explicit IoError(const std::string& msg) : DataError(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A perturbation whose rank-1 denominator is numerically zero; callers
// exclude the offending pair rather than aborting a whole run.
class DegeneratePerturbation : public NumericError {
public:
    explicit DegeneratePerturbation(const std::string& msg) : NumericError(msg) {}
};

}  // namespace netfense
