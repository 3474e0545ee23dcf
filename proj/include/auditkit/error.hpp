#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace auditkit {

/// Base for every error the toolkit raises. The CLI maps these to exit code 2
/// unless a more specific mapping applies.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed interchange-format input.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateCell : public Error {
 public:
  using Error::Error;
};

class UnknownSheet : public Error {
 public:
  using Error::Error;
};

class SheetExists : public Error {
 public:
  using Error::Error;
};

/// Formula text that does not match the grammar. `position` is a 0-based
/// offset into the source text.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& expected)
      : Error("syntax error at " + std::to_string(position) + ": expected " + expected),
        position_(position),
        expected_(expected) {}
  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class UnknownName : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

class EmptyModel : public Error {
 public:
  using Error::Error;
};

class TargetMissing : public Error {
 public:
  using Error::Error;
};

class BaselineDirty : public Error {
 public:
  using Error::Error;
};

class CannotConstruct : public Error {
 public:
  using Error::Error;
};

class NothingToDo : public Error {
 public:
  using Error::Error;
};

}  // namespace auditkit
