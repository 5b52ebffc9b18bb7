#pragma once

#include <stdexcept>
#include <string>

namespace raketab {

enum class ErrorKind {
  Input,           // malformed or inconsistent input data
  Infeasible,      // margins cannot be matched from the given support
  NonConvergence,  // iterative solver hit its iteration cap
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorKind::Input, message) {}
};

}  // namespace raketab
