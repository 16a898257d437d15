#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gtc {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible shapes or dimensions between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument value (out-of-range id, zero threshold, empty grid...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Inconsistent model or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or undefined numerical quantities.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Labeled split cannot be built (class missing, too few nodes).
class SplitError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset content; carries the file and 1-based line when known.
class LoadError : public Error {
 public:
  LoadError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace gtc
