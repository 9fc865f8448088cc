#pragma once

#include <stdexcept>
#include <string>

namespace qrport {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    success = 0,
    usage = 1,
    data = 2,
    numerical = 3,
    interrupted = 130,
};

/// Invalid configuration, flags or API arguments.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse failure with the offending 1-based line number.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A numerical routine could not produce a valid answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A long-running job stopped early at the caller's request.
class Interrupted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qrport
