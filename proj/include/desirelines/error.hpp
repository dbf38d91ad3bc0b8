#pragma once

#include <stdexcept>
#include <string>

namespace desirelines {

/// Malformed or invalid user input: trajectory files, scene files, directives,
/// configuration, and parameter values that violate their invariants.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An error raised inside a named pipeline stage. `input_error()` distinguishes
/// bad input (exit status 1) from internal failures (exit status 2).
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message, bool input_error)
        : std::runtime_error("[" + stage + "] " + message),
          stage_(std::move(stage)),
          input_error_(input_error) {}

    const std::string& stage() const noexcept { return stage_; }
    bool input_error() const noexcept { return input_error_; }

private:
    std::string stage_;
    bool input_error_;
};

}  // namespace desirelines
