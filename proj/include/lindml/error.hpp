#pragma once

#include <stdexcept>
#include <string>

namespace lindml {

enum class ErrorKind {
  invalid_argument,    // bad parameter value (counts, rates, options)
  dimension_mismatch,  // vectors/matrices/datasets of incompatible shape
  degenerate,          // input too small to normalize, no valid triplet, ...
  unbalanced,          // closed-form loss requires equal class sizes
  parse,               // malformed CSV / JSON input
  bound_violation,     // an inequality that must hold did not (implementation bug)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace lindml
