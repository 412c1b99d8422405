#pragma once

#include <stdexcept>
#include <string>

namespace resamplex {

enum class ErrorKind {
  invalid_argument,
  parse,
  arity_mismatch,
  duplicate_leaf,
  missing_leaf,
  cap_exceeded,
  infeasible,
  tied_values,
  unknown_scenario,
  unsupported,
};

const char* to_string(ErrorKind kind) noexcept;

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

}  // namespace resamplex
