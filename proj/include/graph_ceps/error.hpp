#pragma once

#include <stdexcept>
#include <string>

namespace graph_ceps {

enum class ErrorKind {
  invalid_topology,
  invalid_parameter,
  invalid_matrix,
  invalid_input,
  numerical_failure,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_topology: return "invalid-topology";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_matrix: return "invalid-matrix";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace graph_ceps
