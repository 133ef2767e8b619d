#pragma once

#include <stdexcept>
#include <string>

namespace tbdp {

enum class ErrorKind {
  instance_mismatch,
  horizon_exceeded,
  invalid_split,
  invalid_range,
  feedback_domain,
  capacity,
  representation,
  grid,
  factorization,
  incomplete_reduction,
  independence,
  validation,
  usage,
};

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw SolverError(kind, what);
}

}  // namespace tbdp
