#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hydroscen {

/// Invalid configuration or violated precondition on user-supplied settings.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input data that is malformed, inconsistent, or violates a domain invariant.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A DataError tied to a specific line of a text file.
class ParseError : public DataError {
public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// NaN/Inf produced during a numeric computation.
class NumericFault : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hydroscen
