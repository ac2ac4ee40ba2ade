#pragma once

#include <stdexcept>
#include <string>

namespace kabb {

// Process exit codes surfaced by the CLI.
enum class ExitCode : int {
    ok = 0,
    validation = 1,
    io = 2,
    budget = 3,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::validation)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Malformed document text or a schema violation in a field.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

// Document parsed but violates a structural invariant.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error("validation error: " + what) {}
};

// Arguments outside an operation's domain (empty subset, reward outside [0,1], ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain error: " + what) {}
};

// Bad caller input to the pipeline (empty instruction, ...).
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error("input error: " + what) {}
};

class RoutingError : public Error {
public:
    explicit RoutingError(const std::string& what) : Error("routing error: " + what) {}
};

class FeedbackError : public Error {
public:
    explicit FeedbackError(const std::string& what) : Error("feedback error: " + what) {}
};

class RestoreError : public Error {
public:
    explicit RestoreError(const std::string& what) : Error("restore error: " + what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& what)
        : Error("budget error: " + what, ExitCode::budget) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("i/o error: " + what, ExitCode::io) {}
};

}  // namespace kabb
