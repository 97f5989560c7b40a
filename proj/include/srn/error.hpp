#pragma once

#include <stdexcept>
#include <string>

namespace srn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Object is in a state where the request cannot be served (empty store, NaN Q).
class InvalidState : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class DivergedTraining : public Error {
 public:
  using Error::Error;
};

}  // namespace srn
