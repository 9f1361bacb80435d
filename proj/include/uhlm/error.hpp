#pragma once

#include <stdexcept>
#include <string>

namespace uhlm {

/// Broad failure classes. The CLI maps each to a process exit code.
enum class ErrorKind {
  Config,     // malformed or inconsistent configuration
  Backend,    // model backend failure (protocol, timeout, I/O)
  Numerical,  // invalid numerical input or failed validation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) {
  return Error(ErrorKind::Config, what);
}
inline Error backend_error(const std::string& what) {
  return Error(ErrorKind::Backend, what);
}
inline Error numerical_error(const std::string& what) {
  return Error(ErrorKind::Numerical, what);
}

}  // namespace uhlm
