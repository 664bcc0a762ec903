#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hpm {

// Violated precondition or misuse of an API (wrong shapes, missing inputs).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf where finite values are required.
class NumericDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A compiled sequence would not fit in the model's position table.
class LengthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t item, std::size_t column)
      : std::runtime_error("parse error at item " + std::to_string(item) + " (column " +
                           std::to_string(column) + "): " + msg),
        item_(item),
        column_(column) {}

  std::size_t item() const { return item_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t item_;
  std::size_t column_;
};

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hpm
