#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace binsum {

// Root of every error thrown by the toolkit. The `category()` string is what
// ends up in failure logs, so keep it short and stable.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    [[nodiscard]] virtual const char* category() const noexcept { return "error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "io"; }
};

// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const char* category() const noexcept override { return "parse"; }

private:
    std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "validation"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "config"; }
};

}  // namespace binsum
