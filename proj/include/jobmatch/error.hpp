#pragma once

#include <stdexcept>
#include <string>

namespace jobmatch {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, invalid configuration, violated preconditions.
// The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A malformed row in a tab- or space-separated input file.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& column,
             const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": column '" + column +
                        "': " + what),
        file_(file),
        line_(line),
        column_(column) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string column_;
};

}  // namespace jobmatch
