#pragma once

#include <stdexcept>
#include <string>

namespace miir {

enum class ErrorKind {
  Syntax,         // malformed input text
  Reference,      // dangling / unknown identifier
  Invalid,        // value violates a model invariant
  Conservation,   // power balance broken at build time
  Singular,       // linear system has no unique solution
  Budget,         // enumeration budget exceeded
  Range,          // argument out of range
  Solver,         // no solver result available / numeric breakdown
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::Reference: return "reference";
    case ErrorKind::Invalid: return "invalid";
    case ErrorKind::Conservation: return "conservation";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Budget: return "budget";
    case ErrorKind::Range: return "range";
    case ErrorKind::Solver: return "solver";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace miir
