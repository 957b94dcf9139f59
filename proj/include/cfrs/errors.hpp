#pragma once

#include <stdexcept>
#include <string>

namespace cfrs {

// Malformed instance file or config; `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

// Non-finite values encountered where finite math is required.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No capacity-feasible assignment/solution exists for the request.
class InfeasibleError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cfrs
