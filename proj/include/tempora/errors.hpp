#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tempora {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input: missing files, unknown tokens, vocabulary mismatch.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : InputError(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Shapes of parameters, biases or documents disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The requested computation is outside what can be done exactly (e.g. 2^F too large).
class RefusalError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during training or evaluation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tempora
