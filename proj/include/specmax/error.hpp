#pragma once

#include <stdexcept>
#include <string>

namespace specmax {

// Failure classes map onto CLI exit codes (see cli.hpp).
enum class ErrorKind {
  Config,    // bad input: config files, parameters, preconditions
  Solver,    // eigensolver / factorization failure
  Diverged,  // optimization did not reach a certifiable state
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) {
  return Error(ErrorKind::Config, what);
}
inline Error solver_error(const std::string& what) {
  return Error(ErrorKind::Solver, what);
}
inline Error diverged_error(const std::string& what) {
  return Error(ErrorKind::Diverged, what);
}

}  // namespace specmax
